#pragma once

#include "cdrx/activity.hpp"
#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/ml.hpp"
#include "cdrx/places.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace cdrx {

// ---------------------------------------------------------------------------
// Location groups.

/// Connected components of the "within radius_km" relation over the given
/// points, singletons dropped. Members are sorted and groups are ordered by
/// their first member.
inline std::vector<std::vector<std::string>> single_link_groups(std::vector<std::pair<std::string, GeoPoint>> items,
                                                                double radius_km) {
    if (!(radius_km >= 0.0)) throw ConfigError("group radius must be >= 0");
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return std::tie(a.second.lat, a.first) < std::tie(b.second.lat, b.first);
    });
    const double lat_band = radius_km / (earth_radius_km * std::numbers::pi / 180.0) + 1e-12;
    detail::DisjointSets sets(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size() && items[j].second.lat - items[i].second.lat <= lat_band; ++j)
            if (haversine_km(items[i].second, items[j].second) <= radius_km)
                sets.unite(static_cast<int>(i), static_cast<int>(j));
    std::map<int, std::vector<std::string>> comps;
    for (std::size_t i = 0; i < items.size(); ++i) comps[sets.find(static_cast<int>(i))].push_back(items[i].first);
    std::vector<std::vector<std::string>> out;
    for (auto& [_, members] : comps) {
        if (members.size() < 2) continue;
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::vector<std::string>> neighbor_groups(const std::vector<UserPlaces>& places, double radius_km) {
    std::vector<std::pair<std::string, GeoPoint>> items;
    for (const auto& p : places) items.push_back({p.user, p.home});
    return single_link_groups(std::move(items), radius_km);
}

/// Groups REGULAR workers by workplace; everybody else is left out.
inline std::vector<std::vector<std::string>> colleague_groups(const std::vector<UserPlaces>& places,
                                                              const std::map<std::string, WorkerKind>& kinds,
                                                              double radius_km) {
    std::vector<std::pair<std::string, GeoPoint>> items;
    for (const auto& p : places) {
        auto it = kinds.find(p.user);
        if (p.workplace && it != kinds.end() && it->second == WorkerKind::regular) items.push_back({p.user, *p.workplace});
    }
    return single_link_groups(std::move(items), radius_km);
}

// ---------------------------------------------------------------------------
// Transport mode.

enum class Transport : std::uint8_t { walking, non_motorized, motorized };

inline std::string_view to_string(Transport t) {
    static constexpr std::array<std::string_view, 3> names{"WALKING", "NON_MOTORIZED", "MOTORIZED"};
    return names[static_cast<int>(t)];
}

inline std::optional<Transport> parse_transport(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (to_string(static_cast<Transport>(i)) == s) return static_cast<Transport>(i);
    return std::nullopt;
}

struct SpeedSummary {
    double avg_kmh = 0.0;  // total distance over total time of the defined samples
    double peak_kmh = 0.0;
    std::size_t samples = 0;

    std::vector<double> vec() const { return {avg_kmh, peak_kmh}; }
};

/// Speeds between consecutive en-route calls of each trip. Samples with no
/// elapsed time carry no information and are skipped.
inline std::optional<SpeedSummary> trip_speeds(const std::vector<Trip>& trips) {
    SpeedSummary s;
    double km = 0.0, hours = 0.0;
    for (const auto& t : trips)
        for (std::size_t i = 1; i < t.en_route.size(); ++i) {
            auto v = speed_kmh(t.en_route[i - 1], t.en_route[i]);
            if (!v) continue;
            s.samples += 1;
            s.peak_kmh = std::max(s.peak_kmh, *v);
            km += haversine_km(t.en_route[i - 1].loc, t.en_route[i].loc);
            hours += static_cast<double>(t.en_route[i].instant - t.en_route[i - 1].instant) / 3600.0;
        }
    if (s.samples == 0) return std::nullopt;
    s.avg_kmh = km / hours;
    return s;
}

struct TransportThresholds {
    double walking_below_kmh = 7.0;
    double motorized_above_kmh = 15.0;
};

inline Transport bootstrap_transport(const SpeedSummary& s, const TransportThresholds& t = {}) {
    if (s.avg_kmh < t.walking_below_kmh) return Transport::walking;
    if (s.avg_kmh > t.motorized_above_kmh) return Transport::motorized;
    return Transport::non_motorized;
}

/// WALKING-vs-rest and MOTORIZED-vs-rest over (average, peak) speed, with
/// NON_MOTORIZED as the residual.
struct TransportModel {
    bool trained = false;
    TransportThresholds thresholds;
    ml::Standardizer scaler;
    std::optional<ml::LinearModel<int>> walking;
    std::optional<ml::LinearModel<int>> motorized;
};

inline TransportModel train_transport_model(const std::vector<SpeedSummary>& users, const TransportThresholds& th = {},
                                            const ml::LinearTrainOptions& train = {}) {
    TransportModel m;
    m.trained = true;
    m.thresholds = th;
    std::vector<std::vector<double>> rows;
    for (const auto& u : users) rows.push_back(u.vec());
    m.scaler = ml::Standardizer::fit(rows);
    auto fit = [&](Transport positive) -> std::optional<ml::LinearModel<int>> {
        std::vector<ml::Sample<int>> samples;
        bool pos = false, neg = false;
        for (const auto& u : users) {
            int y = bootstrap_transport(u, th) == positive ? 1 : 0;
            (y ? pos : neg) = true;
            samples.push_back({m.scaler.apply(u.vec()), y});
        }
        if (!pos || !neg) return std::nullopt;
        return ml::train_linear(std::span<const ml::Sample<int>>(samples), train);
    };
    m.walking = fit(Transport::walking);
    m.motorized = fit(Transport::motorized);
    return m;
}

/// Falls back to the bootstrap thresholds for a side that could not be
/// trained (its class never occurred).
inline std::optional<Transport> classify_transport(const std::optional<SpeedSummary>& s, const TransportModel& m) {
    if (!s) return std::nullopt;
    if (!m.trained) throw DependencyError("transport model is not trained");
    auto x = m.scaler.apply(s->vec());
    std::span<const double> xs(x);
    auto fallback = bootstrap_transport(*s, m.thresholds);
    double w = m.walking ? m.walking->decision(xs) : (fallback == Transport::walking ? 1.0 : -1.0);
    double v = m.motorized ? m.motorized->decision(xs) : (fallback == Transport::motorized ? 1.0 : -1.0);
    if (w <= 0.0 && v <= 0.0) return Transport::non_motorized;
    return w >= v ? Transport::walking : Transport::motorized;
}

// ---------------------------------------------------------------------------
// Working days and hours.

struct WorkingDays {
    std::vector<Weekday> working;
    Weekday off_day = Weekday::sunday;
    bool ambiguous = false;
    std::vector<Weekday> off_candidates;
    std::array<double, 7> presence_rate{};
};

/// `presence` holds every observed date and whether the user was at the
/// workplace in working hours that day.
inline WorkingDays detect_working_days(const std::vector<std::pair<Date, bool>>& presence) {
    if (presence.empty()) throw DataError("working-day detection needs at least 14 observed days");
    auto [lo, hi] = std::minmax_element(presence.begin(), presence.end(),
                                        [](const auto& a, const auto& b) { return a.first < b.first; });
    if (hi->first - lo->first + 1 < 14) throw DataError("working-day detection needs at least 14 observed days");
    std::array<int, 7> seen{}, at{};
    for (const auto& [d, present] : presence) {
        auto w = static_cast<int>(d.weekday());
        seen[w] += 1;
        at[w] += present;
    }
    WorkingDays out;
    double min_rate = 2.0;
    for (int w = 0; w < 7; ++w) {
        out.presence_rate[w] = seen[w] ? static_cast<double>(at[w]) / seen[w] : 0.0;
        if (seen[w] && 2 * at[w] >= seen[w]) out.working.push_back(static_cast<Weekday>(w));
        if (seen[w]) min_rate = std::min(min_rate, out.presence_rate[w]);
    }
    for (int w = 0; w < 7; ++w)
        if (seen[w] && out.presence_rate[w] == min_rate) out.off_candidates.push_back(static_cast<Weekday>(w));
    out.off_day = out.off_candidates.front();
    out.ambiguous = out.off_candidates.size() > 1;
    return out;
}

/// Hours spanned by the middle 90% of workplace call times, widened to whole
/// hours: floor of the 5th percentile to ceiling of the 95th.
inline std::optional<TimeWindow> estimate_working_hours(std::vector<TimeOfDay> times) {
    if (times.empty()) return std::nullopt;
    std::sort(times.begin(), times.end());
    auto at = [&](double q) {
        auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(times.size() - 1)));
        return static_cast<double>(times[i].seconds()) / 3600.0;
    };
    int start = static_cast<int>(std::floor(at(0.05)));
    int end = static_cast<int>(std::ceil(at(0.95)));
    if (end <= start) end = start + 1;
    return TimeWindow::hours(WindowLabel::working_hours, start, std::min(end, 24));
}

// ---------------------------------------------------------------------------
// Time and place special groups.

inline constexpr std::string_view label_service_holder = "SERVICE_HOLDER";
inline constexpr std::string_view label_homemaker = "HOMEMAKER";
inline constexpr std::string_view label_late_night = "LATE_NIGHT_CALLER";
inline constexpr std::string_view label_professional = "COMMUNICATION_PROFESSIONAL";
inline constexpr std::string_view label_traveler = "FREQUENT_TRAVELER";

struct SpecialGroupOptions {
    double late_night_fraction = 0.5;
    double professional_quantile = 0.9;
    double traveler_quantile = 0.9;
    double traveler_min_towers = 6.0; // distinct towers per active day
};

struct UserSignals {
    std::string user;
    double mu_total = 0.0;
    double mu_late_night = 0.0;
    double mu_working = 0.0;
    double towers_per_day = 0.0;
    bool regular = false;
};

/// Mean number of distinct towers per day with at least one call.
inline double towers_per_active_day(const UserLog& log) {
    std::map<Date, std::set<GeoPoint>> days;
    for (const auto& e : log.entries) days[e.instant.date()].insert(e.loc);
    if (days.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [_, s] : days) total += static_cast<double>(s.size());
    return total / static_cast<double>(days.size());
}

/// Value at nearest rank ceil(q*n) of the sorted sample.
inline double upper_quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    auto n = static_cast<double>(v.size());
    auto i = static_cast<std::size_t>(std::clamp(std::ceil(q * n) - 1.0, 0.0, n - 1.0));
    return v[i];
}

/// Labels per user: LATE_NIGHT_CALLER when the late-night share of μ reaches
/// the threshold, COMMUNICATION_PROFESSIONAL for REGULAR workers whose
/// working-hours μ is above the quantile of REGULAR workers, and
/// FREQUENT_TRAVELER when towers per day is above the population quantile
/// and at least the absolute floor.
inline std::map<std::string, std::vector<std::string>> special_groups(const std::vector<UserSignals>& users,
                                                                      const SpecialGroupOptions& opt = {}) {
    std::vector<double> work, travel;
    for (const auto& u : users) {
        if (u.regular) work.push_back(u.mu_working);
        travel.push_back(u.towers_per_day);
    }
    const double work_cut = upper_quantile(work, opt.professional_quantile);
    const double travel_cut = upper_quantile(travel, opt.traveler_quantile);
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& u : users) {
        auto& labels = out[u.user];
        if (u.mu_total <= 0.0) continue;
        if (u.mu_late_night / u.mu_total >= opt.late_night_fraction) labels.emplace_back(label_late_night);
        if (u.regular && !work.empty() && u.mu_working > work_cut) labels.emplace_back(label_professional);
        if (u.towers_per_day > travel_cut && u.towers_per_day >= opt.traveler_min_towers) labels.emplace_back(label_traveler);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calling-relationship strength and closeness.

struct EdgeStats {
    std::size_t weight = 0;
    std::int64_t total_duration = 0;
    std::size_t active_days = 0;
    std::size_t off_hours_calls = 0;

    double off_hours_fraction() const { return weight ? static_cast<double>(off_hours_calls) / weight : 0.0; }
    auto key() const { return std::tuple{weight, total_duration, active_days}; }
};

inline std::map<UserPair, EdgeStats> edge_stats(const CallGraph& g, const Period& off_hours) {
    std::map<UserPair, EdgeStats> out;
    for (const auto& [pair, calls] : g.edges) {
        EdgeStats s;
        std::set<Date> days;
        for (const auto& c : calls) {
            s.weight += 1;
            s.total_duration += c.duration;
            days.insert(c.instant.date());
            s.off_hours_calls += off_hours.contains(c.instant);
        }
        s.active_days = days.size();
        out[pair] = s;
    }
    return out;
}

/// Strength of each edge: the share of other edges whose (weight, matched
/// duration, active days) key is strictly smaller. A lone edge scores 1.
inline std::map<UserPair, double> call_strengths(const std::map<UserPair, EdgeStats>& stats) {
    std::vector<std::tuple<std::size_t, std::int64_t, std::size_t>> keys;
    keys.reserve(stats.size());
    for (const auto& [_, s] : stats) keys.push_back(s.key());
    std::sort(keys.begin(), keys.end());
    std::map<UserPair, double> out;
    const double denom = static_cast<double>(stats.size()) - 1.0;
    for (const auto& [pair, s] : stats) {
        auto below = static_cast<double>(std::lower_bound(keys.begin(), keys.end(), s.key()) - keys.begin());
        out[pair] = denom > 0.0 ? below / denom : 1.0;
    }
    return out;
}

struct CallStrength {
    double strength = 0.0;
    double off_hours_fraction = 0.0;
};

inline CallStrength call_strength(const std::map<UserPair, EdgeStats>& stats, const std::map<UserPair, double>& strengths,
                                  std::string_view a, std::string_view b) {
    auto key = make_pair_key(a, b);
    auto it = strengths.find(key);
    if (it == strengths.end()) return {};
    return {it->second, stats.at(key).off_hours_fraction()};
}

struct ClosenessComponents {
    double call_strength = 0.0;
    bool co_home = false;
    bool co_work = false;
    int co_poi_count = 0;
    double off_hours_fraction = 0.0;
};

/// Conditional factors of the closeness chain.
struct ClosenessFactors {
    double base_home = 0.9;
    double base_work = 0.6;
    double base_other = 0.3;
    double poi_step = 0.1;
    int poi_cap = 3;
    double off_floor = 0.5;
};

/// strength * base(co_home | co_work | other) * (1 + step*min(poi, cap))
/// * (floor + (1 - floor)*off_fraction), clamped to [0, 1].
inline double closeness(const ClosenessComponents& c, const ClosenessFactors& f = {}) {
    double base = c.co_home ? f.base_home : c.co_work ? f.base_work : f.base_other;
    double poi = 1.0 + f.poi_step * std::min(std::max(c.co_poi_count, 0), f.poi_cap);
    double off = f.off_floor + (1.0 - f.off_floor) * std::clamp(c.off_hours_fraction, 0.0, 1.0);
    return std::clamp(std::clamp(c.call_strength, 0.0, 1.0) * base * poi * off, 0.0, 1.0);
}

struct ClosenessScore {
    UserPair pair;
    ClosenessComponents components;
    double score = 0.0;
};

struct FamilyFriendOptions {
    double tau_family = 0.5;
    double tau_friend = 0.6;
    double tau_off = 0.3;
};

struct LabeledGroup {
    std::string kind; // FAMILY or FRIEND
    std::vector<std::string> members;
    bool operator==(const LabeledGroup&) const = default;
};

/// FAMILY: components over co-home pairs with strength >= tau_family.
/// FRIEND: components over co-work pairs calling off-hours at least tau_off
/// of the time with strength >= tau_friend.
inline std::vector<LabeledGroup> detect_family_friends(const std::vector<ClosenessScore>& scores,
                                                       const FamilyFriendOptions& opt = {}) {
    auto components = [&](auto keep, std::string_view kind) {
        std::map<std::string, int> index;
        std::vector<std::string> names;
        std::vector<std::pair<int, int>> links;
        auto id = [&](const std::string& u) {
            auto [it, fresh] = index.try_emplace(u, static_cast<int>(names.size()));
            if (fresh) names.push_back(u);
            return it->second;
        };
        for (const auto& s : scores)
            if (keep(s)) links.push_back({id(s.pair.first), id(s.pair.second)});
        detail::DisjointSets sets(names.size());
        for (auto [a, b] : links) sets.unite(a, b);
        std::map<int, std::vector<std::string>> comps;
        for (std::size_t i = 0; i < names.size(); ++i) comps[sets.find(static_cast<int>(i))].push_back(names[i]);
        std::vector<LabeledGroup> out;
        for (auto& [_, m] : comps) {
            std::sort(m.begin(), m.end());
            out.push_back({std::string(kind), std::move(m)});
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.members < b.members; });
        return out;
    };
    auto family = components(
        [&](const ClosenessScore& s) { return s.components.co_home && s.components.call_strength >= opt.tau_family; },
        "FAMILY");
    auto friends = components(
        [&](const ClosenessScore& s) {
            return s.components.co_work && s.components.off_hours_fraction >= opt.tau_off &&
                   s.components.call_strength >= opt.tau_friend;
        },
        "FRIEND");
    family.insert(family.end(), friends.begin(), friends.end());
    return family;
}

// ---------------------------------------------------------------------------
// Profiles.

/// Optional `lat,lon,radius_km,category` file naming areas; a workplace
/// inside an area gets `AREA:<category>`.
struct Gazetteer {
    struct Area {
        GeoPoint center;
        double radius_km = 0.0;
        std::string category;
    };
    std::vector<Area> areas;

    static Gazetteer load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read gazetteer '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        Table t = csv::parse(ss.str());
        Gazetteer g;
        auto ci = [&](std::string_view c) { return t.column(c); };
        std::size_t la = ci("lat"), lo = ci("lon"), r = ci("radius_km"), c = ci("category");
        for (const auto& row : t.rows) {
            auto lat = parse_double(row[la]), lon = parse_double(row[lo]), rad = parse_double(row[r]);
            if (!lat || !lon || !rad || row[c].empty()) throw ConfigError("malformed gazetteer row in '" + path + "'");
            g.areas.push_back({{*lat, *lon}, *rad, row[c]});
        }
        return g;
    }

    std::vector<std::string> categories(const GeoPoint& p) const {
        std::vector<std::string> out;
        for (const auto& a : areas)
            if (haversine_km(a.center, p) <= a.radius_km) out.push_back(a.category);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

struct SocialProfile {
    std::string user;
    WorkerKind kind = WorkerKind::irregular;
    GeoPoint home;
    std::optional<GeoPoint> workplace;
    std::optional<double> commute_km;
    std::optional<TimeWindow> working_hours;
    std::optional<Weekday> off_day;
    std::set<std::string> social_groups;
    std::optional<Transport> transport;
};

/// SERVICE_HOLDER for REGULAR workers with a workplace; HOMEMAKER for
/// IRREGULAR users whose home POI carries at least `home_share` of their μ.
inline std::optional<std::string_view> occupational_label(WorkerKind kind, bool has_workplace, double home_mu_share,
                                                          double home_share = 0.5) {
    if (kind == WorkerKind::regular && has_workplace) return label_service_holder;
    if (kind == WorkerKind::irregular && home_mu_share >= home_share) return label_homemaker;
    return std::nullopt;
}

} // namespace cdrx
