#pragma once

#include "cdrx/activity.hpp"
#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/ingest.hpp"
#include "cdrx/ml.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace cdrx {

/// FNV-1a, used to derive per-user seeds that do not depend on iteration order.
inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// City-wide working hours and off-hours. Working hours skip the weekend
/// day; off-hours take the whole weekend day.
struct CityPeriods {
    Period working;
    Period off;

    static CityPeriods make(const TimeWindow& working_hours, const TimeWindow& off_hours, std::optional<Weekday> weekend) {
        CityPeriods p;
        p.working = Period{working_hours, std::nullopt, weekend, WeekendRule::exclude};
        p.off = Period{off_hours, std::nullopt, weekend, WeekendRule::whole_day};
        return p;
    }

    static CityPeriods defaults(std::optional<Weekday> weekend) {
        return make(TimeWindow::hours(WindowLabel::working_hours, 9, 17), TimeWindow::hours(WindowLabel::off_hours, 19, 7),
                    weekend);
    }
};

// ---------------------------------------------------------------------------
// Layer 2: POIs, home and workplace.

enum class ClusterMethod : std::uint8_t { em, xmeans };

inline std::string_view to_string(ClusterMethod m) { return m == ClusterMethod::em ? "em" : "xmeans"; }

inline std::optional<ClusterMethod> parse_cluster_method(std::string_view s) {
    if (s == "em") return ClusterMethod::em;
    if (s == "xmeans") return ClusterMethod::xmeans;
    return std::nullopt;
}

struct PlaceOptions {
    ClusterMethod method = ClusterMethod::em;
    double min_weight_fraction = 0.1;
    double merge_radius_km = 1.0;
    std::size_t em_k_max = 6;
    std::size_t xmeans_k_max = 10;
    std::uint64_t seed = 1;
};

struct PoiMember {
    GeoPoint loc;
    double mu_off = 0.0;
    double mu_work = 0.0;
    double mu_total = 0.0;
    std::int64_t calls = 0;
};

struct Poi {
    GeoPoint centroid;
    double weight_fraction = 0.0; // share of the user's calls
    double mu_off = 0.0;
    double mu_work = 0.0;
    double mu_total = 0.0;
    std::vector<PoiMember> members; // sorted by location

    /// Member tower with the highest score under `field`; ties go to the
    /// higher total, then the smaller location.
    GeoPoint strongest(double PoiMember::*field) const {
        const PoiMember* best = &members.front();
        for (const auto& m : members)
            if (std::tuple{m.*field, m.mu_total, -m.loc.lat, -m.loc.lon} >
                std::tuple{best->*field, best->mu_total, -best->loc.lat, -best->loc.lon})
                best = &m;
        return best->loc;
    }
};

/// Clusters a user's towers (weighted by call count) and keeps clusters
/// holding at least `min_weight_fraction` of the calls. When every cluster
/// falls below the cut the heaviest one is kept. POIs come back ordered by
/// centroid.
inline std::vector<Poi> detect_pois(const UserLog& log, const CityPeriods& periods, const UsageScoreParams& params,
                                    const PlaceOptions& opt) {
    if (log.entries.empty()) throw DataError("detect_pois: user '" + log.user + "' has no calls");
    std::map<GeoPoint, std::array<std::int64_t, 6>> acc; // calls/dur for off, work, total
    for (const auto& e : log.entries) {
        auto& a = acc[e.loc];
        if (periods.off.contains(e.instant)) a[0] += 1, a[1] += e.duration;
        if (periods.working.contains(e.instant)) a[2] += 1, a[3] += e.duration;
        a[4] += 1;
        a[5] += e.duration;
    }
    std::vector<PoiMember> towers;
    std::vector<ml::WeightedPoint<2>> pts;
    for (const auto& [loc, a] : acc) {
        towers.push_back({loc, params.score(a[0], a[1]), params.score(a[2], a[3]), params.score(a[4], a[5]), a[4]});
        pts.push_back({{loc.lat, loc.lon}, static_cast<double>(a[4])});
    }
    std::uint64_t seed = opt.seed ^ stable_hash(log.user);
    ml::ClusterModel<2> model;
    std::span<const ml::WeightedPoint<2>> view(pts);
    if (opt.method == ClusterMethod::em) {
        ml::EmOptions eo;
        eo.seed = seed;
        eo.tol = 1e-6;
        model = ml::em_cluster_bic(view, opt.em_k_max, eo);
    } else {
        ml::XmeansOptions xo;
        xo.seed = seed;
        xo.k_max = opt.xmeans_k_max;
        model = ml::xmeans_cluster(view, xo);
    }
    const double total_calls = static_cast<double>(log.entries.size());
    std::vector<Poi> pois(model.k());
    for (std::size_t i = 0; i < towers.size(); ++i) {
        auto& p = pois[static_cast<std::size_t>(model.assignment[i])];
        p.members.push_back(towers[i]);
        p.weight_fraction += static_cast<double>(towers[i].calls) / total_calls;
        p.mu_off += towers[i].mu_off;
        p.mu_work += towers[i].mu_work;
        p.mu_total += towers[i].mu_total;
    }
    for (std::size_t c = 0; c < pois.size(); ++c)
        pois[c].centroid = {model.clusters[c].centroid[0], model.clusters[c].centroid[1]};
    std::erase_if(pois, [](const Poi& p) { return p.members.empty(); });
    std::vector<Poi> kept;
    for (const auto& p : pois)
        if (p.weight_fraction >= opt.min_weight_fraction) kept.push_back(p);
    if (kept.empty())
        kept.push_back(*std::max_element(pois.begin(), pois.end(), [](const Poi& a, const Poi& b) {
            return std::tuple{a.weight_fraction, b.centroid} < std::tuple{b.weight_fraction, a.centroid};
        }));
    std::sort(kept.begin(), kept.end(), [](const Poi& a, const Poi& b) { return a.centroid < b.centroid; });
    return kept;
}

struct HomeWork {
    std::size_t home_poi = 0;
    GeoPoint home;
    std::optional<std::size_t> work_poi;
    std::optional<GeoPoint> workplace;
};

/// Home is the POI with the highest off-hours score, located at its
/// strongest off-hours tower. The candidate workplace is the POI with the
/// highest working-hours score, located at its strongest working-hours
/// tower; it is dropped when it is the home POI or lies within
/// `merge_radius_km` of home.
inline HomeWork infer_home_work(const std::vector<Poi>& pois, double merge_radius_km = 1.0) {
    if (pois.empty()) throw DataError("infer_home_work: no POIs");
    auto argmax = [&](double Poi::*field) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pois.size(); ++i) {
            const auto& a = pois[i];
            const auto& b = pois[best];
            if (std::tuple{a.*field, a.mu_total, -a.centroid.lat, -a.centroid.lon} >
                std::tuple{b.*field, b.mu_total, -b.centroid.lat, -b.centroid.lon})
                best = i;
        }
        return best;
    };
    HomeWork hw;
    hw.home_poi = argmax(&Poi::mu_off);
    hw.home = pois[hw.home_poi].strongest(&PoiMember::mu_off);
    std::size_t w = argmax(&Poi::mu_work);
    if (w != hw.home_poi && pois[w].mu_work > 0.0) {
        GeoPoint loc = pois[w].strongest(&PoiMember::mu_work);
        if (haversine_km(loc, hw.home) > merge_radius_km) {
            hw.work_poi = w;
            hw.workplace = loc;
        }
    }
    return hw;
}

struct UserPlaces {
    std::string user;
    std::vector<Poi> pois;
    GeoPoint home;
    std::optional<GeoPoint> workplace;
};

inline UserPlaces user_places(const UserLog& log, const CityPeriods& periods, const UsageScoreParams& params,
                              const PlaceOptions& opt) {
    UserPlaces up;
    up.user = log.user;
    up.pois = detect_pois(log, periods, params, opt);
    auto hw = infer_home_work(up.pois, opt.merge_radius_km);
    up.home = hw.home;
    up.workplace = hw.workplace;
    return up;
}

// ---------------------------------------------------------------------------
// Zone activity and BUSY/IDLE state.

/// Per-tower call and active-user counts for a list of windows (windows may
/// overlap here; each is counted independently).
struct ZoneProfile {
    GeoPoint zone;
    std::vector<SlotCount> per_window;
};

inline std::vector<ZoneProfile> zone_profiles(const CdrDataset& ds, std::span<const Period> windows) {
    std::map<GeoPoint, std::vector<SlotCount>> counts;
    std::map<GeoPoint, std::vector<std::set<std::string_view>>> users;
    for (const auto& t : ds.towers()) {
        counts[t].assign(windows.size(), {});
        users[t].resize(windows.size());
    }
    for (const auto& r : ds.records()) {
        auto loc = r.loc();
        Instant t = r.instant();
        for (std::size_t w = 0; w < windows.size(); ++w)
            if (windows[w].contains(t)) {
                counts[loc][w].calls += 1;
                users[loc][w].insert(r.user);
            }
    }
    std::vector<ZoneProfile> out;
    out.reserve(counts.size());
    for (auto& [loc, c] : counts) {
        for (std::size_t w = 0; w < windows.size(); ++w) c[w].active_users = static_cast<std::int64_t>(users[loc][w].size());
        out.push_back({loc, std::move(c)});
    }
    return out;
}

enum class BusyClass : std::uint8_t { idle, busy };

inline std::string_view to_string(BusyClass b) { return b == BusyClass::busy ? "BUSY" : "IDLE"; }

/// Linear BUSY/IDLE model for one window. Features are (calls, active
/// users), z-scored; weights are kept non-negative so more activity never
/// turns a BUSY zone IDLE.
struct BusyModel {
    ml::Standardizer scaler;
    std::optional<ml::LinearModel<BusyClass>> model;
    bool degenerate = false; // every zone looked alike; all are IDLE
    std::size_t seeds = 0;   // number of bootstrap-labelled zones
};

inline std::vector<double> busy_features(const SlotCount& c) {
    return {static_cast<double>(c.calls), static_cast<double>(c.active_users)};
}

/// Trains on bootstrap labels: zones in the top call decile are BUSY,
/// zones in the bottom decile IDLE.
inline BusyModel train_busy_model(const std::vector<ZoneProfile>& zones, std::size_t window,
                                  const ml::LinearTrainOptions& train = {}) {
    BusyModel m;
    if (zones.empty()) {
        m.degenerate = true;
        return m;
    }
    std::vector<std::int64_t> calls;
    std::vector<std::vector<double>> rows;
    for (const auto& z : zones) {
        calls.push_back(z.per_window.at(window).calls);
        rows.push_back(busy_features(z.per_window[window]));
    }
    m.scaler = ml::Standardizer::fit(rows);
    std::vector<std::int64_t> sorted = calls;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto lo = sorted[static_cast<std::size_t>(std::floor(0.1 * n))];
    auto hi = sorted[static_cast<std::size_t>(std::max(0.0, std::ceil(0.9 * n) - 1.0))];
    if (lo >= hi) {
        m.degenerate = true;
        return m;
    }
    std::vector<ml::Sample<BusyClass>> samples;
    for (std::size_t i = 0; i < zones.size(); ++i) {
        if (calls[i] >= hi) samples.push_back({m.scaler.apply(rows[i]), BusyClass::busy});
        else if (calls[i] <= lo) samples.push_back({m.scaler.apply(rows[i]), BusyClass::idle});
    }
    m.seeds = samples.size();
    auto opt = train;
    opt.nonnegative_weights = true;
    m.model = ml::train_linear(std::span<const ml::Sample<BusyClass>>(samples), opt);
    return m;
}

inline BusyClass classify_zone_busyness(const BusyModel& m, const SlotCount& c) {
    if (m.degenerate) return BusyClass::idle;
    if (!m.model) throw DependencyError("zone busyness model is not trained");
    auto x = m.scaler.apply(busy_features(c));
    return ml::predict_linear(*m.model, std::span<const double>(x));
}

// ---------------------------------------------------------------------------
// Layer 3: regular / irregular workers.

enum class WorkerKind : std::uint8_t { irregular, regular };

inline std::string_view to_string(WorkerKind k) { return k == WorkerKind::regular ? "REGULAR" : "IRREGULAR"; }

inline std::optional<WorkerKind> parse_worker_kind(std::string_view s) {
    if (s == "REGULAR") return WorkerKind::regular;
    if (s == "IRREGULAR") return WorkerKind::irregular;
    return std::nullopt;
}

struct WorkerFeatures {
    double has_workplace = 0.0;
    double regularity = 0.0; // share of observed working days seen at the workplace in working hours
    double work_share = 0.0; // working-hours μ at the workplace POI over total μ

    std::vector<double> vec() const { return {has_workplace, regularity, work_share}; }
};

inline WorkerFeatures worker_features(const UserLog& log, const UserPlaces& places, const CityPeriods& periods,
                                      const UsageScoreParams& params, double presence_radius_km = 1.0) {
    WorkerFeatures f;
    if (!places.workplace) return f;
    f.has_workplace = 1.0;
    std::set<Date> observed, present;
    std::int64_t calls = 0, dur = 0, wcalls = 0, wdur = 0;
    const auto weekend = periods.working.weekend;
    std::set<GeoPoint> work_poi;
    for (const auto& p : places.pois) {
        bool holds = std::any_of(p.members.begin(), p.members.end(),
                                 [&](const PoiMember& x) { return x.loc == *places.workplace; });
        if (holds)
            for (const auto& m : p.members) work_poi.insert(m.loc);
    }
    for (const auto& e : log.entries) {
        calls += 1;
        dur += e.duration;
        Date d = e.instant.date();
        if (!weekend || d.weekday() != *weekend) observed.insert(d);
        if (!periods.working.contains(e.instant)) continue;
        if (work_poi.count(e.loc)) wcalls += 1, wdur += e.duration;
        if (haversine_km(e.loc, *places.workplace) <= presence_radius_km) present.insert(d);
    }
    f.regularity = observed.empty() ? 0.0 : static_cast<double>(present.size()) / static_cast<double>(observed.size());
    double total = params.score(calls, dur);
    f.work_share = total > 0.0 ? params.score(wcalls, wdur) / total : 0.0;
    return f;
}

/// Bootstrap rule: a workplace plus regularity at or above the threshold.
inline WorkerKind bootstrap_worker_kind(const WorkerFeatures& f, double regularity_threshold) {
    return f.has_workplace > 0.0 && f.regularity >= regularity_threshold ? WorkerKind::regular : WorkerKind::irregular;
}

struct WorkerModel {
    double regularity_threshold = 0.5;
    ml::Standardizer scaler;
    std::optional<ml::LinearModel<WorkerKind>> model; // absent when the bootstrap saw one class only
};

inline WorkerModel train_worker_model(const std::vector<WorkerFeatures>& feats, double regularity_threshold,
                                      const ml::LinearTrainOptions& train = {}) {
    WorkerModel m;
    m.regularity_threshold = regularity_threshold;
    std::vector<std::vector<double>> rows;
    for (const auto& f : feats) rows.push_back(f.vec());
    m.scaler = ml::Standardizer::fit(rows);
    std::vector<ml::Sample<WorkerKind>> samples;
    bool both[2] = {false, false};
    for (const auto& f : feats) {
        auto k = bootstrap_worker_kind(f, regularity_threshold);
        both[static_cast<int>(k)] = true;
        samples.push_back({m.scaler.apply(f.vec()), k});
    }
    if (both[0] && both[1]) m.model = ml::train_linear(std::span<const ml::Sample<WorkerKind>>(samples), train);
    return m;
}

/// Table-5 distance buckets, right-exclusive.
inline const std::array<std::pair<double, std::string_view>, 5>& commute_buckets() {
    static const std::array<std::pair<double, std::string_view>, 5> b{
        {{2.0, "0-2"}, {5.0, "2-5"}, {10.0, "5-10"}, {20.0, "10-20"}, {100.0, "20-100"}}};
    return b;
}

/// Bucket label for a commute; nullopt beyond 100 km or for negative input.
inline std::optional<std::string_view> distance_bucket(double km) {
    if (!(km >= 0.0)) return std::nullopt;
    for (const auto& [edge, label] : commute_buckets())
        if (km < edge) return label;
    return std::nullopt;
}

struct WorkerClass {
    std::string user;
    WorkerKind kind = WorkerKind::irregular;
    std::optional<double> commute_km;
    std::optional<std::string_view> bucket;
};

inline WorkerClass classify_worker(const UserPlaces& places, const WorkerFeatures& f, const WorkerModel& m) {
    WorkerClass wc;
    wc.user = places.user;
    if (places.workplace) {
        if (m.model) {
            auto x = m.scaler.apply(f.vec());
            wc.kind = ml::predict_linear(*m.model, std::span<const double>(x));
        } else {
            wc.kind = bootstrap_worker_kind(f, m.regularity_threshold);
        }
    }
    if (wc.kind == WorkerKind::regular) {
        wc.commute_km = haversine_km(places.home, *places.workplace);
        wc.bucket = distance_bucket(*wc.commute_km);
    }
    return wc;
}

// ---------------------------------------------------------------------------
// Commute trips and routes.

enum class Leg : std::uint8_t { to_work, to_home };

inline std::string_view to_string(Leg l) { return l == Leg::to_work ? "to_work" : "to_home"; }

/// One home->work or work->home trip: the anchor calls at either end and
/// the calls in between.
struct Trip {
    Date date;
    Leg leg = Leg::to_work;
    Fix start;
    Fix end;
    std::vector<Fix> en_route;
};

/// Per day, the calls between the last home call before the first workplace
/// call (morning) and between the last workplace call and the next home call
/// (evening). Trips longer than `max_gap_s` are dropped.
inline std::vector<Trip> commute_trips(const UserLog& log, const GeoPoint& home, const GeoPoint& work,
                                       std::int64_t max_gap_s = 3 * 3600) {
    std::vector<Trip> trips;
    std::size_t i = 0;
    const auto& es = log.entries;
    while (i < es.size()) {
        Date d = es[i].instant.date();
        std::size_t j = i;
        while (j < es.size() && es[j].instant.date() == d) ++j;
        auto emit = [&](std::size_t a, std::size_t b, Leg leg) {
            if (es[b].instant - es[a].instant > max_gap_s) return;
            Trip t{d, leg, {es[a].instant, es[a].loc}, {es[b].instant, es[b].loc}, {}};
            for (std::size_t k = a + 1; k < b; ++k) t.en_route.push_back({es[k].instant, es[k].loc});
            trips.push_back(std::move(t));
        };
        std::optional<std::size_t> first_work, last_work;
        for (std::size_t k = i; k < j; ++k)
            if (es[k].loc == work) {
                if (!first_work) first_work = k;
                last_work = k;
            }
        if (first_work) {
            for (std::size_t k = *first_work; k-- > i;)
                if (es[k].loc == home) {
                    emit(k, *first_work, Leg::to_work);
                    break;
                }
            for (std::size_t k = *last_work + 1; k < j; ++k)
                if (es[k].loc == home) {
                    emit(*last_work, k, Leg::to_home);
                    break;
                }
        }
        i = j;
    }
    return trips;
}

/// Shortest home->work path through the unique en-route call locations.
/// Without en-route calls the route is the direct two-point line.
inline Route predict_route(const GeoPoint& home, const GeoPoint& work, const std::vector<Trip>& trips, int k = 1) {
    std::vector<GeoPoint> locs;
    for (const auto& t : trips)
        for (const auto& f : t.en_route) locs.push_back(f.loc);
    auto g = build_route_graph(locs, home, work, k);
    return shortest_route(g);
}

/// Share of `truth` points matched by some predicted point within `tol_km`.
inline double route_overlap(const std::vector<GeoPoint>& truth, const std::vector<GeoPoint>& predicted, double tol_km = 0.1) {
    if (truth.empty()) return 1.0;
    std::size_t hit = 0;
    for (const auto& t : truth)
        if (std::any_of(predicted.begin(), predicted.end(), [&](const GeoPoint& p) { return haversine_km(t, p) <= tol_km; }))
            ++hit;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Residential / commercial / miscellaneous zones.

enum class ZoneType : std::uint8_t { residential, commercial, miscellaneous };

inline std::string_view to_string(ZoneType z) {
    static constexpr std::array<std::string_view, 3> names{"RESIDENTIAL", "COMMERCIAL", "MISCELLANEOUS"};
    return names[static_cast<int>(z)];
}

struct ZoneTypeFeatures {
    GeoPoint zone;
    double home_count = 0.0;
    double work_count = 0.0;
    double off_work_ratio = 0.0; // off-hours calls over working-hours calls (denominator floored at 1)

    std::vector<double> vec() const { return {home_count, work_count, off_work_ratio}; }
};

inline ZoneType bootstrap_zone_type(const ZoneTypeFeatures& f) {
    if (f.home_count == 0.0 && f.work_count == 0.0) return ZoneType::miscellaneous;
    if (f.work_count == 0.0 || f.home_count / f.work_count > 2.0) return ZoneType::residential;
    if (f.home_count / f.work_count < 0.5) return ZoneType::commercial;
    return ZoneType::miscellaneous;
}

/// One-vs-rest pair: RESIDENTIAL-vs-rest and COMMERCIAL-vs-rest, with
/// MISCELLANEOUS as the residual. A side whose bootstrap labels were all
/// negative is absent and never fires.
struct ZoneTypeModel {
    bool trained = false;
    ml::Standardizer scaler;
    std::optional<ml::LinearModel<int>> residential;
    std::optional<ml::LinearModel<int>> commercial;
};

inline ZoneTypeModel train_zone_type_model(const std::vector<ZoneTypeFeatures>& zones, const ml::LinearTrainOptions& train = {}) {
    ZoneTypeModel m;
    m.trained = true;
    std::vector<std::vector<double>> rows;
    for (const auto& z : zones) rows.push_back(z.vec());
    m.scaler = ml::Standardizer::fit(rows);
    auto fit = [&](ZoneType positive) -> std::optional<ml::LinearModel<int>> {
        std::vector<ml::Sample<int>> samples;
        bool pos = false, neg = false;
        for (const auto& z : zones) {
            int y = bootstrap_zone_type(z) == positive ? 1 : 0;
            (y ? pos : neg) = true;
            samples.push_back({m.scaler.apply(z.vec()), y});
        }
        if (!pos || !neg) return std::nullopt;
        return ml::train_linear(std::span<const ml::Sample<int>>(samples), train);
    };
    m.residential = fit(ZoneType::residential);
    m.commercial = fit(ZoneType::commercial);
    return m;
}

inline ZoneType classify_zone_type(const ZoneTypeFeatures& f, const ZoneTypeModel& m) {
    if (!m.trained) throw DependencyError("zone type model is not trained");
    auto x = m.scaler.apply(f.vec());
    std::span<const double> xs(x);
    double r = m.residential ? m.residential->decision(xs) : -1.0;
    double c = m.commercial ? m.commercial->decision(xs) : -1.0;
    if (r <= 0.0 && c <= 0.0) return ZoneType::miscellaneous;
    return r >= c ? ZoneType::residential : ZoneType::commercial;
}

} // namespace cdrx
