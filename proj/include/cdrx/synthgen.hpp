#pragma once

#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/ingest.hpp"
#include "cdrx/ml.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <fstream>
#include <ostream>
#include <sstream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cdrx::synth {

enum class PersonaKind : std::uint8_t { regular_worker, homemaker, student, late_night_caller, frequent_traveler };

inline constexpr std::array<std::string_view, 5> persona_kind_names{"REGULAR_WORKER", "HOMEMAKER", "STUDENT",
                                                                    "LATE_NIGHT_CALLER", "FREQUENT_TRAVELER"};

inline std::string_view to_string(PersonaKind k) { return persona_kind_names[static_cast<int>(k)]; }

inline std::optional<PersonaKind> parse_persona_kind(std::string_view s) {
    for (std::size_t i = 0; i < persona_kind_names.size(); ++i)
        if (persona_kind_names[i] == s) return static_cast<PersonaKind>(i);
    return std::nullopt;
}

struct Persona {
    std::string user;
    PersonaKind kind = PersonaKind::homemaker;
    GeoPoint home;
    std::optional<GeoPoint> workplace;
    std::vector<GeoPoint> commute_path; // towers strictly between home and workplace
    std::optional<TimeWindow> working_hours;
    std::optional<Weekday> off_day;
    std::optional<std::string> family_id;
    std::optional<std::string> colleague_group;
    double activity_rate = 0.0; // mean solo calls per weekday
    std::optional<double> transport_kmh;

    // Per-persona places that are not part of the truth file.
    std::optional<GeoPoint> campus;
};

/// Share of each persona kind, in PersonaKind order.
using PersonaMix = std::array<double, 5>;

struct CityConfig {
    std::size_t towers = 1360;
    BBox bbox{23.70, 90.33, 23.88, 90.4635}; // ~272 sq-km, ~5 towers per sq-km
    std::size_t num_users = 500;
    int days = 30;
    Date start = *Date::from_ymd(2012, 6, 19);
    Weekday weekend_day = Weekday::friday;
    std::uint64_t seed = 1;
    double noise = 0.0;
    double activity_rate = 13.0;
    PersonaMix mix{0.26, 0.34, 0.22, 0.10, 0.08};

    void validate() const {
        if (towers < 4) throw ConfigError("city needs at least 4 towers");
        if (num_users < 1) throw ConfigError("city needs at least one user");
        if (days < 7) throw ConfigError("city needs at least 7 days");
        if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must lie in [0, 1]");
        if (!(activity_rate > 0.0)) throw ConfigError("activity rate must be positive");
        if (!(bbox.max_lat > bbox.min_lat && bbox.max_lon > bbox.min_lon)) throw ConfigError("city bounding box is empty");
        double s = 0.0;
        for (double m : mix) {
            if (!(m >= 0.0)) throw ConfigError("persona shares must be non-negative");
            s += m;
        }
        if (!(s > 0.0)) throw ConfigError("persona shares must not all be zero");
    }

    ObservationWindow window() const { return ObservationWindow::days_from(start, days); }
};

enum class Relation : std::uint8_t { family, colleague, friend_, acquaintance };

inline std::string_view to_string(Relation r) {
    static constexpr std::array<std::string_view, 4> names{"family", "colleague", "friend", "acquaintance"};
    return names[static_cast<int>(r)];
}

/// One two-party call as emitted: both endpoint records share instant and
/// duration.
struct PairedCall {
    std::string a;
    std::string b;
    Instant instant;
    std::int32_t duration = 0;
    Relation relation = Relation::family;
};

struct GeneratedCity {
    CityConfig config;
    std::vector<GeoPoint> towers;
    std::vector<Persona> personas;
    std::vector<CdrRecord> records; // canonical order
    std::vector<PairedCall> paired;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix(seed);
    for (unsigned char c : tag) h = splitmix(h ^ c);
    h = splitmix(h ^ a);
    return splitmix(h ^ (b + 0x632BE59BD9B4E019ULL));
}

/// Small sampler set on top of mt19937_64 with fixed algorithms, so output
/// does not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double unit() { return ml::detail::unit(gen_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::size_t below(std::size_t n) { return ml::detail::index_below(gen_, n); }
    bool chance(double p) { return unit() < p; }
    double normal() {
        double u1 = 1.0 - unit(), u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda > 60.0) return std::max(0, static_cast<int>(std::lround(lambda + std::sqrt(lambda) * normal())));
        double limit = std::exp(-lambda), p = 1.0;
        int k = -1;
        do {
            ++k;
            p *= unit();
        } while (p > limit);
        return k;
    }
    std::size_t pick(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = unit() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0 && weights[i] > 0.0) return i;
        }
        for (std::size_t i = weights.size(); i-- > 0;)
            if (weights[i] > 0.0) return i;
        return 0;
    }

private:
    std::mt19937_64 gen_;
};

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

/// Jittered lattice of towers with row/column lookup.
class TowerGrid {
public:
    TowerGrid(std::size_t count, const BBox& box, Rng& rng) : box_(box) {
        double h = haversine_km({box.min_lat, box.min_lon}, {box.max_lat, box.min_lon});
        double w = haversine_km({box.center().lat, box.min_lon}, {box.center().lat, box.max_lon});
        cols_ = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(std::sqrt(count * w / h))));
        rows_ = (count + cols_ - 1) / cols_;
        dlat_ = (box.max_lat - box.min_lat) / static_cast<double>(rows_);
        dlon_ = (box.max_lon - box.min_lon) / static_cast<double>(cols_);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t r = i / cols_, c = i % cols_;
            double lat = box.min_lat + (static_cast<double>(r) + 0.5 + rng.uniform(-0.3, 0.3)) * dlat_;
            double lon = box.min_lon + (static_cast<double>(c) + 0.5 + rng.uniform(-0.3, 0.3)) * dlon_;
            towers_.push_back({round6(lat), round6(lon)});
        }
    }

    const std::vector<GeoPoint>& towers() const { return towers_; }
    std::size_t size() const { return towers_.size(); }

    std::size_t nearest(const GeoPoint& p) const {
        long r0 = std::lround((p.lat - box_.min_lat) / dlat_ - 0.5);
        long c0 = std::lround((p.lon - box_.min_lon) / dlon_ - 0.5);
        r0 = std::clamp<long>(r0, 0, static_cast<long>(rows_) - 1);
        c0 = std::clamp<long>(c0, 0, static_cast<long>(cols_) - 1);
        std::size_t best = towers_.size();
        double best_d = 0.0;
        for (long r = r0 - 2; r <= r0 + 2; ++r)
            for (long c = c0 - 2; c <= c0 + 2; ++c) {
                if (r < 0 || c < 0 || c >= static_cast<long>(cols_)) continue;
                auto i = static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c);
                if (i >= towers_.size()) continue;
                double d = haversine_km(p, towers_[i]);
                if (best == towers_.size() || d < best_d) best = i, best_d = d;
            }
        if (best == towers_.size()) {
            for (std::size_t i = 0; i < towers_.size(); ++i) {
                double d = haversine_km(p, towers_[i]);
                if (best == towers_.size() || d < best_d) best = i, best_d = d;
            }
        }
        return best;
    }

    /// Lattice 8-neighbourhood.
    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        long r0 = static_cast<long>(i / cols_), c0 = static_cast<long>(i % cols_);
        for (long r = r0 - 1; r <= r0 + 1; ++r)
            for (long c = c0 - 1; c <= c0 + 1; ++c) {
                if ((r == r0 && c == c0) || r < 0 || c < 0 || c >= static_cast<long>(cols_)) continue;
                auto j = static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c);
                if (j < towers_.size()) out.push_back(j);
            }
        return out;
    }

    const BBox& box() const { return box_; }

private:
    BBox box_;
    std::size_t rows_ = 0, cols_ = 0;
    double dlat_ = 0.0, dlon_ = 0.0;
    std::vector<GeoPoint> towers_;
};

inline GeoPoint offset_km(const GeoPoint& p, double north_km, double east_km) {
    double dlat = north_km / (earth_radius_km * std::numbers::pi / 180.0);
    double dlon = east_km / (earth_radius_km * std::numbers::pi / 180.0 * std::cos(deg_to_rad(p.lat)));
    return {p.lat + dlat, p.lon + dlon};
}

/// A tower roughly `km` away from `from` in a random direction, inside the box.
inline std::size_t tower_at_distance(const TowerGrid& grid, std::size_t from, double km, double min_km, Rng& rng) {
    const GeoPoint& o = grid.towers()[from];
    for (int attempt = 0; attempt < 64; ++attempt) {
        double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
        GeoPoint target = offset_km(o, km * std::sin(th), km * std::cos(th));
        if (!grid.box().contains(target)) continue;
        std::size_t t = grid.nearest(target);
        if (haversine_km(o, grid.towers()[t]) >= min_km) return t;
    }
    // Fall back to the farthest-from-origin corner direction.
    std::size_t best = from;
    double best_d = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double d = haversine_km(o, grid.towers()[i]);
        if (d >= min_km && (best_d < 0.0 || std::abs(d - km) < std::abs(best_d - km))) best = i, best_d = d;
    }
    return best;
}

/// Towers met along a gently curved line from home to work, in travel order.
inline std::vector<std::size_t> commute_towers(const TowerGrid& grid, std::size_t home, std::size_t work, Rng& rng) {
    const GeoPoint& a = grid.towers()[home];
    const GeoPoint& b = grid.towers()[work];
    double d = haversine_km(a, b);
    LocalProjection proj(a);
    auto pa = proj.forward(a), pb = proj.forward(b);
    double bend = rng.uniform(-0.15, 0.15) * d;
    double mx = (pa.x + pb.x) / 2.0, my = (pa.y + pb.y) / 2.0;
    double nx = -(pb.y - pa.y) / d, ny = (pb.x - pa.x) / d;
    PlanePoint ctrl{mx + nx * bend, my + ny * bend};
    int steps = std::max(2, static_cast<int>(std::ceil(d / 0.2)));
    std::vector<std::size_t> out;
    std::set<std::size_t> seen{home, work};
    for (int s = 1; s < steps; ++s) {
        double t = static_cast<double>(s) / steps;
        double u = 1.0 - t;
        PlanePoint q{u * u * pa.x + 2 * u * t * ctrl.x + t * t * pb.x, u * u * pa.y + 2 * u * t * ctrl.y + t * t * pb.y};
        std::size_t tw = grid.nearest(proj.inverse(q));
        if (seen.insert(tw).second) out.push_back(tw);
    }
    return out;
}

/// Where a persona is during one day: intervals with a fixed tower and
/// intervals travelling along a tower sequence. Anything uncovered is home.
struct Segment {
    std::int32_t from = 0; // seconds of day
    std::int32_t to = 0;
    std::vector<std::size_t> towers; // one tower: stay; several: travel in order
    std::vector<double> cum_km;
};

struct DayPlan {
    std::vector<Segment> segments;
    std::vector<std::pair<std::int32_t, std::int32_t>> travel; // en-route intervals
};

inline Segment travel_segment(const TowerGrid& grid, std::vector<std::size_t> seq, std::int32_t from, std::int32_t to) {
    Segment s{from, to, std::move(seq), {}};
    double c = 0.0;
    s.cum_km.push_back(0.0);
    for (std::size_t i = 1; i < s.towers.size(); ++i) {
        c += haversine_km(grid.towers()[s.towers[i - 1]], grid.towers()[s.towers[i]]);
        s.cum_km.push_back(c);
    }
    return s;
}

inline std::size_t locate(const DayPlan& plan, std::size_t home, std::int32_t t) {
    for (const auto& s : plan.segments) {
        if (t < s.from || t >= s.to) continue;
        if (s.towers.size() == 1) return s.towers[0];
        double frac = static_cast<double>(t - s.from) / static_cast<double>(s.to - s.from);
        double km = frac * s.cum_km.back();
        std::size_t best = 0;
        for (std::size_t i = 1; i < s.cum_km.size(); ++i)
            if (std::abs(s.cum_km[i] - km) < std::abs(s.cum_km[best] - km)) best = i;
        return s.towers[best];
    }
    return home;
}

struct PersonaState {
    Persona p;
    std::size_t home = 0;
    std::optional<std::size_t> work;
    std::vector<std::size_t> path;
    std::optional<std::size_t> campus;
    double path_km = 0.0;
};

struct Event {
    Instant instant;
    std::int32_t duration = 0;
    std::size_t a = 0;                 // persona index
    std::optional<std::size_t> b;      // partner for paired calls
    Relation relation = Relation::family;
    std::size_t loc_a = 0, loc_b = 0;  // tower indices before noise
};

inline std::int32_t sample_duration(Rng& rng, double mu) {
    double v = std::exp(mu + 0.8 * rng.normal());
    return static_cast<std::int32_t>(std::clamp(std::lround(v), 5L, 3600L));
}

/// Awake-time call sampler: 97% between 07:00 and 23:00, the rest in the
/// late evening or small hours.
inline std::int32_t sample_awake(Rng& rng) {
    if (rng.chance(0.97)) return static_cast<std::int32_t>(rng.uniform(7 * 3600, 23 * 3600));
    double h = rng.uniform(0.0, 8.0 * 3600); // 23:00 .. 07:00
    auto s = static_cast<std::int32_t>(23 * 3600 + h);
    return s >= 86400 ? s - 86400 : s;
}

} // namespace detail

/// Builds a synthetic city: towers, personas with households, offices and
/// commutes, and a month of calls.
///
/// Solo calls per day are Poisson around each persona's activity rate
/// (scaled by 0.6 on the weekend day); persona rates are log-normal around
/// the configured mean. Calls are placed at wherever the persona's day plan
/// has them. Relationship calls (family, colleagues, friends, acquaintances)
/// are emitted as two equal-time, equal-duration records. No two unrelated
/// calls share a duration within 2 s of each other, so cross-referencing is
/// unambiguous. With probability `noise` a record moves to a random lattice
/// neighbour of its true tower.
inline GeneratedCity generate_city(const CityConfig& cfg) {
    using namespace detail;
    cfg.validate();
    GeneratedCity city;
    city.config = cfg;
    Rng city_rng(sub_seed(cfg.seed, "towers"));
    TowerGrid grid(cfg.towers, cfg.bbox, city_rng);
    city.towers = grid.towers();

    // Population: households first, persona kinds per member.
    Rng pop(sub_seed(cfg.seed, "population"));
    std::vector<PersonaState> people;
    std::vector<std::vector<std::size_t>> households;
    const std::vector<double> household_sizes{0.2, 0.25, 0.25, 0.2, 0.1};
    std::vector<double> mix(cfg.mix.begin(), cfg.mix.end());
    auto user_id = [](std::size_t i) {
        std::string s = std::to_string(i + 1);
        return "U" + std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
    };
    while (people.size() < cfg.num_users) {
        std::size_t size = std::min(pop.pick(household_sizes) + 1, cfg.num_users - people.size());
        std::size_t home = pop.below(grid.size());
        std::vector<std::size_t> members;
        for (std::size_t m = 0; m < size; ++m) {
            PersonaState s;
            s.p.user = user_id(people.size());
            s.p.kind = static_cast<PersonaKind>(pop.pick(mix));
            s.home = home;
            s.p.home = grid.towers()[home];
            double sigma = 0.4;
            s.p.activity_rate = cfg.activity_rate * std::exp(sigma * pop.normal() - sigma * sigma / 2.0);
            if (s.p.kind == PersonaKind::frequent_traveler) s.p.activity_rate *= 1.3;
            members.push_back(people.size());
            people.push_back(std::move(s));
        }
        if (members.size() >= 2) {
            std::string fid = std::to_string(households.size() + 1);
            fid = "F" + std::string(fid.size() < 4 ? 4 - fid.size() : 0, '0') + fid;
            for (auto m : members) people[m].p.family_id = fid;
        }
        households.push_back(std::move(members));
    }

    // Workers: offices, hours, commutes.
    struct Office {
        std::size_t tower;
        std::vector<std::size_t> staff;
    };
    std::vector<Office> offices;
    const std::vector<double> commute_bucket_share{0.15, 0.35, 0.30, 0.20};
    const std::array<std::pair<double, double>, 4> commute_ranges{{{1.5, 2.0}, {2.0, 5.0}, {5.0, 10.0}, {10.0, 20.0}}};
    for (std::size_t i = 0; i < people.size(); ++i) {
        auto& s = people[i];
        if (s.p.kind == PersonaKind::student) {
            s.campus = tower_at_distance(grid, s.home, pop.uniform(2.0, 6.0), 1.5, pop);
            s.p.campus = grid.towers()[*s.campus];
        }
        if (s.p.kind != PersonaKind::regular_worker) continue;
        std::optional<std::size_t> office;
        if (!offices.empty() && pop.chance(0.5)) {
            std::vector<std::size_t> eligible;
            for (std::size_t o = 0; o < offices.size(); ++o) {
                double d = haversine_km(grid.towers()[offices[o].tower], s.p.home);
                if (d >= 1.5 && d < 20.0) eligible.push_back(o);
            }
            if (!eligible.empty()) office = eligible[pop.below(eligible.size())];
        }
        if (!office) {
            auto [lo, hi] = commute_ranges[pop.pick(commute_bucket_share)];
            std::size_t t = tower_at_distance(grid, s.home, pop.uniform(lo, hi), 1.5, pop);
            offices.push_back({t, {}});
            office = offices.size() - 1;
        }
        offices[*office].staff.push_back(i);
        s.work = offices[*office].tower;
        s.p.workplace = grid.towers()[*s.work];
        int start = pop.chance(0.6) ? 9 : 10;
        s.p.working_hours = TimeWindow::hours(WindowLabel::working_hours, start, start + 8);
        if (pop.chance(0.8)) {
            s.p.off_day = cfg.weekend_day;
        } else {
            auto d = static_cast<int>(pop.below(6));
            if (d >= static_cast<int>(cfg.weekend_day)) ++d;
            s.p.off_day = static_cast<Weekday>(d);
        }
        s.path = commute_towers(grid, s.home, *s.work, pop);
        for (auto t : s.path) s.p.commute_path.push_back(grid.towers()[t]);
        std::vector<GeoPoint> full{s.p.home};
        full.insert(full.end(), s.p.commute_path.begin(), s.p.commute_path.end());
        full.push_back(*s.p.workplace);
        s.path_km = path_length_km(full);
        double d = haversine_km(s.p.home, *s.p.workplace);
        s.p.transport_kmh = d < 2.5 ? pop.uniform(4.0, 5.5) : d < 6.0 ? pop.uniform(9.0, 13.0) : pop.uniform(18.0, 30.0);
    }
    std::size_t group_no = 0;
    for (const auto& o : offices) {
        if (o.staff.size() < 2) continue;
        std::string gid = std::to_string(++group_no);
        gid = "C" + std::string(gid.size() < 4 ? 4 - gid.size() : 0, '0') + gid;
        for (auto m : o.staff) people[m].p.colleague_group = gid;
    }

    // Relationships.
    struct Tie {
        std::size_t a, b;
        Relation relation;
        double rate;
    };
    std::vector<Tie> ties;
    for (const auto& h : households)
        for (std::size_t x = 0; x < h.size(); ++x)
            for (std::size_t y = x + 1; y < h.size(); ++y) ties.push_back({h[x], h[y], Relation::family, 0.4});
    for (const auto& o : offices)
        for (std::size_t x = 0; x < o.staff.size(); ++x)
            for (std::size_t y = x + 1; y < o.staff.size(); ++y) {
                ties.push_back({o.staff[x], o.staff[y], Relation::colleague, 0.15});
                if (pop.chance(0.3)) ties.push_back({o.staff[x], o.staff[y], Relation::friend_, 0.25});
            }
    {
        std::set<std::pair<std::size_t, std::size_t>> taken;
        for (const auto& t : ties) taken.insert({t.a, t.b});
        for (std::size_t i = 0; i < people.size() && people.size() > 1; ++i)
            for (int k = 0; k < 3; ++k) {
                std::size_t j = pop.below(people.size());
                if (j == i) continue;
                auto key = std::minmax(i, j);
                const auto& fi = people[i].p.family_id;
                if (fi && fi == people[j].p.family_id) continue;
                if (!taken.insert(key).second) continue;
                ties.push_back({key.first, key.second, Relation::acquaintance, 0.04});
            }
    }

    // Day plans.
    const int days = cfg.days;
    std::vector<std::vector<DayPlan>> plans(people.size(), std::vector<DayPlan>(static_cast<std::size_t>(days)));
    std::vector<std::vector<char>> workday(people.size(), std::vector<char>(static_cast<std::size_t>(days), 0));
    for (std::size_t i = 0; i < people.size(); ++i) {
        auto& s = people[i];
        Rng rng(sub_seed(cfg.seed, "plan", i));
        for (int d = 0; d < days; ++d) {
            Date date = cfg.start + d;
            bool weekend = date.weekday() == cfg.weekend_day;
            auto& plan = plans[i][static_cast<std::size_t>(d)];
            auto errand = [&](double p, double radius_km) {
                if (!rng.chance(p)) return;
                std::size_t t = tower_at_distance(grid, s.home, rng.uniform(0.8, radius_km), 0.5, rng);
                auto from = static_cast<std::int32_t>(rng.uniform(10 * 3600, 15 * 3600));
                plan.segments.push_back({from, from + 2 * 3600, {t}, {}});
            };
            switch (s.p.kind) {
            case PersonaKind::regular_worker: {
                if (date.weekday() == *s.p.off_day) {
                    errand(0.3, 3.0);
                    break;
                }
                workday[i][static_cast<std::size_t>(d)] = 1;
                auto travel = static_cast<std::int32_t>(std::lround(s.path_km / *s.p.transport_kmh * 3600.0));
                travel = std::max(travel, 60);
                std::int32_t start = s.p.working_hours->start().seconds();
                std::int32_t end = s.p.working_hours->end().seconds();
                std::int32_t arrive = start - static_cast<std::int32_t>(rng.uniform(5 * 60, 20 * 60));
                std::int32_t depart = arrive - travel;
                std::int32_t leave = end + static_cast<std::int32_t>(rng.uniform(0, 15 * 60));
                std::int32_t back = leave + travel;
                std::vector<std::size_t> there{s.home};
                there.insert(there.end(), s.path.begin(), s.path.end());
                there.push_back(*s.work);
                std::vector<std::size_t> home_again(there.rbegin(), there.rend());
                plan.segments.push_back(travel_segment(grid, there, depart, arrive));
                plan.segments.push_back({arrive, leave, {*s.work}, {}});
                plan.segments.push_back(travel_segment(grid, home_again, leave, back));
                plan.travel = {{depart, arrive}, {leave, back}};
                break;
            }
            case PersonaKind::student:
                if (!weekend && rng.chance(0.35)) plan.segments.push_back({10 * 3600, 15 * 3600, {*s.campus}, {}});
                else errand(0.2, 3.0);
                break;
            case PersonaKind::homemaker:
                errand(0.3, 3.0);
                break;
            case PersonaKind::late_night_caller:
                errand(0.2, 3.0);
                break;
            case PersonaKind::frequent_traveler: {
                if (weekend) break;
                int stops = 8 + static_cast<int>(rng.below(5));
                std::int32_t t0 = 8 * 3600, span = (19 - 8) * 3600 / stops;
                for (int k = 0; k < stops; ++k) {
                    std::size_t t = rng.below(grid.size());
                    plan.segments.push_back({t0 + k * span, t0 + (k + 1) * span, {t}, {}});
                }
                break;
            }
            }
        }
    }

    // Events.
    std::vector<Event> events;
    for (std::size_t i = 0; i < people.size(); ++i) {
        const auto& s = people[i];
        Rng rng(sub_seed(cfg.seed, "calls", i));
        for (int d = 0; d < days; ++d) {
            Date date = cfg.start + d;
            const auto& plan = plans[i][static_cast<std::size_t>(d)];
            double factor = date.weekday() == cfg.weekend_day ? 0.6 : 1.0;
            int n = rng.poisson(s.p.activity_rate * factor);
            for (int c = 0; c < n; ++c) {
                std::int32_t t;
                if (s.p.kind == PersonaKind::late_night_caller && rng.chance(0.7))
                    t = static_cast<std::int32_t>(rng.uniform(0, 4 * 3600));
                else if (s.p.kind == PersonaKind::frequent_traveler && !plan.segments.empty() && rng.chance(0.8))
                    t = static_cast<std::int32_t>(rng.uniform(8 * 3600, 19 * 3600));
                else
                    t = sample_awake(rng);
                Event e{Instant{date, TimeOfDay{t}}, sample_duration(rng, 4.0), i, std::nullopt};
                e.loc_a = locate(plan, s.home, t);
                events.push_back(e);
            }
            for (auto [from, to] : plan.travel) {
                int m = rng.poisson(1.5);
                for (int c = 0; c < m; ++c) {
                    auto t = static_cast<std::int32_t>(rng.uniform(from, to));
                    Event e{Instant{date, TimeOfDay{t}}, sample_duration(rng, 4.0), i, std::nullopt};
                    e.loc_a = locate(plan, s.home, t);
                    events.push_back(e);
                }
            }
        }
    }
    for (std::size_t k = 0; k < ties.size(); ++k) {
        const auto& tie = ties[k];
        Rng rng(sub_seed(cfg.seed, "tie", k));
        const auto& A = people[tie.a];
        const auto& B = people[tie.b];
        for (int d = 0; d < days; ++d) {
            auto di = static_cast<std::size_t>(d);
            bool at_work = workday[tie.a][di] && workday[tie.b][di];
            if ((tie.relation == Relation::colleague) && !at_work) continue;
            int n = rng.poisson(tie.rate);
            for (int c = 0; c < n; ++c) {
                std::int32_t t;
                if (tie.relation == Relation::colleague || (tie.relation == Relation::friend_ && at_work && !rng.chance(0.8))) {
                    std::int32_t lo = std::max(A.p.working_hours->start().seconds(), B.p.working_hours->start().seconds());
                    std::int32_t hi = std::min(A.p.working_hours->end().seconds(), B.p.working_hours->end().seconds());
                    t = static_cast<std::int32_t>(rng.uniform(lo, hi));
                } else if (tie.relation == Relation::friend_) {
                    t = static_cast<std::int32_t>(rng.uniform(20 * 3600, 23 * 3600));
                } else {
                    t = sample_awake(rng);
                }
                Event e{Instant{cfg.start + d, TimeOfDay{t}}, sample_duration(rng, 4.5), tie.a, tie.b, tie.relation};
                e.loc_a = locate(plans[tie.a][di], A.home, t);
                e.loc_b = locate(plans[tie.b][di], B.home, t);
                events.push_back(e);
            }
        }
    }

    // De-collide: keep every (duration, second) key at least 3 s away from
    // any other event with the same duration.
    std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
        return std::tuple{x.instant, x.duration, x.a, x.b.value_or(0)} < std::tuple{y.instant, y.duration, y.a, y.b.value_or(0)};
    });
    std::unordered_set<std::uint64_t> occupied;
    auto key = [](std::int32_t dur, std::int64_t sec) {
        return (static_cast<std::uint64_t>(dur) << 40) ^ static_cast<std::uint64_t>(sec);
    };
    for (auto& e : events) {
        for (;;) {
            bool clash = false;
            for (std::int64_t dt = -2; dt <= 2 && !clash; ++dt) clash = occupied.count(key(e.duration, e.instant.seconds() + dt));
            if (!clash) break;
            ++e.duration;
        }
        occupied.insert(key(e.duration, e.instant.seconds()));
    }

    // Records, with per-user location noise.
    std::vector<std::vector<std::pair<const Event*, bool>>> per_user(people.size());
    for (const auto& e : events) {
        per_user[e.a].push_back({&e, true});
        if (e.b) per_user[*e.b].push_back({&e, false});
    }
    for (std::size_t i = 0; i < people.size(); ++i) {
        Rng rng(sub_seed(cfg.seed, "noise", i));
        for (const auto& [e, first] : per_user[i]) {
            std::size_t loc = first ? e->loc_a : e->loc_b;
            if (cfg.noise > 0.0 && rng.chance(cfg.noise)) {
                auto nb = grid.neighbors(loc);
                if (!nb.empty()) loc = nb[rng.below(nb.size())];
            }
            const GeoPoint& g = grid.towers()[loc];
            city.records.push_back({people[i].p.user, e->instant.date(), e->instant.time(), e->duration, g.lat, g.lon});
        }
    }
    std::sort(city.records.begin(), city.records.end(), canonical_less);
    for (const auto& e : events)
        if (e.b) {
            const auto& ua = people[e.a].p.user;
            const auto& ub = people[*e.b].p.user;
            city.paired.push_back({std::min(ua, ub), std::max(ua, ub), e.instant, e.duration, e.relation});
        }
    for (auto& s : people) city.personas.push_back(std::move(s.p));
    return city;
}

// ---------------------------------------------------------------------------
// Files.

inline void write_cdr(const GeneratedCity& city, std::ostream& out) {
    Table t{cdr_columns()};
    t.rows.reserve(city.records.size());
    for (const auto& r : city.records)
        t.rows.push_back({r.user, r.date.str(), r.time.str(), std::to_string(r.duration), format_exact(r.lat), format_exact(r.lon)});
    out << csv::serialize(t);
}

inline const std::vector<std::string>& truth_columns() {
    static const std::vector<std::string> cols{"user_id",  "kind",      "home_lat",        "home_lon",      "work_lat",
                                               "work_lon", "off_day",   "family_id",       "colleague_group", "transport_kmh",
                                               "route",    "working_hours", "activity_rate"};
    return cols;
}

inline Table truth_table(const std::vector<Persona>& personas) {
    Table t{truth_columns()};
    for (const auto& p : personas)
        t.rows.push_back({p.user, std::string(to_string(p.kind)), format_exact(p.home.lat), format_exact(p.home.lon),
                          p.workplace ? format_exact(p.workplace->lat) : "", p.workplace ? format_exact(p.workplace->lon) : "",
                          p.off_day ? std::string(to_string(*p.off_day)) : "", p.family_id.value_or(""),
                          p.colleague_group.value_or(""), p.transport_kmh ? format_fixed(*p.transport_kmh, 3) : "",
                          format_point_list(p.commute_path), p.working_hours ? p.working_hours->span_str() : "",
                          format_fixed(p.activity_rate, 3)});
    return t;
}

inline std::vector<Persona> parse_truth(const Table& t) {
    for (std::string_view c : {"user_id", "kind", "home_lat", "home_lon", "work_lat", "work_lon", "off_day", "family_id",
                               "colleague_group", "transport_kmh", "route"})
        (void)t.column(c);
    auto col = [&](std::string_view c) { return t.column(c); };
    auto opt_col = [&](std::string_view c) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            if (t.columns[i] == c) return i;
        return std::nullopt;
    };
    const auto iu = col("user_id"), ik = col("kind"), ihl = col("home_lat"), iho = col("home_lon"), iwl = col("work_lat"),
               iwo = col("work_lon"), iod = col("off_day"), ifa = col("family_id"), ico = col("colleague_group"),
               itr = col("transport_kmh"), iro = col("route");
    const auto iwh = opt_col("working_hours"), iar = opt_col("activity_rate");
    std::vector<Persona> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto fail = [&](std::string_view what) {
            return DataError("truth row " + std::to_string(r + 1) + ": invalid " + std::string(what));
        };
        Persona p;
        p.user = row[iu];
        auto kind = parse_persona_kind(row[ik]);
        if (!kind) throw fail("kind");
        p.kind = *kind;
        auto hl = parse_double(row[ihl]), ho = parse_double(row[iho]);
        if (!hl || !ho) throw fail("home");
        p.home = {*hl, *ho};
        if (!row[iwl].empty()) {
            auto wl = parse_double(row[iwl]), wo = parse_double(row[iwo]);
            if (!wl || !wo) throw fail("workplace");
            p.workplace = GeoPoint{*wl, *wo};
        }
        if (!row[iod].empty()) {
            auto d = parse_weekday(row[iod]);
            if (!d) throw fail("off_day");
            p.off_day = *d;
        }
        if (!row[ifa].empty()) p.family_id = row[ifa];
        if (!row[ico].empty()) p.colleague_group = row[ico];
        if (!row[itr].empty()) {
            auto v = parse_double(row[itr]);
            if (!v) throw fail("transport_kmh");
            p.transport_kmh = *v;
        }
        auto route = parse_point_list(row[iro]);
        if (!route) throw fail("route");
        p.commute_path = *route;
        if (iwh && !row[*iwh].empty()) {
            auto w = TimeWindow::parse_span(WindowLabel::working_hours, row[*iwh]);
            if (!w) throw fail("working_hours");
            p.working_hours = *w;
        }
        if (iar && !row[*iar].empty()) {
            auto v = parse_double(row[*iar]);
            if (!v) throw fail("activity_rate");
            p.activity_rate = *v;
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline void write_city(const GeneratedCity& city, const std::string& cdr_path, const std::string& truth_path) {
    std::ofstream cdr(cdr_path, std::ios::binary | std::ios::trunc);
    if (!cdr) throw DataError("cannot write '" + cdr_path + "'");
    write_cdr(city, cdr);
    std::ofstream truth(truth_path, std::ios::binary | std::ios::trunc);
    if (!truth) throw DataError("cannot write '" + truth_path + "'");
    truth << csv::serialize(truth_table(city.personas));
    if (!cdr.flush() || !truth.flush()) throw DataError("short write while saving the synthetic city");
}

inline std::vector<Persona> read_truth_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read truth file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_truth(csv::parse(ss.str()));
}

} // namespace cdrx::synth
