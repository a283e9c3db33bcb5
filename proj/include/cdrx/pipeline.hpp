#pragma once

#include "cdrx/activity.hpp"
#include "cdrx/config.hpp"
#include "cdrx/core.hpp"
#include "cdrx/digest.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/ingest.hpp"
#include "cdrx/knowledge_base.hpp"
#include "cdrx/places.hpp"
#include "cdrx/social.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdrx {

using LayerTransaction = KnowledgeBase::LayerTransaction;

namespace pipeline_detail {

inline double cell_double(const std::vector<std::string>& row, std::size_t i, std::string_view what) {
    auto v = parse_double(row.at(i));
    if (!v) throw DataError("malformed " + std::string(what) + " value '" + row.at(i) + "'");
    return *v;
}

inline std::optional<double> cell_opt_double(const std::vector<std::string>& row, std::size_t i, std::string_view what) {
    if (row.at(i).empty()) return std::nullopt;
    return cell_double(row, i, what);
}

inline std::optional<GeoPoint> cell_point(const std::vector<std::string>& row, std::size_t lat, std::size_t lon,
                                          std::string_view what) {
    if (row.at(lat).empty() && row.at(lon).empty()) return std::nullopt;
    return GeoPoint{cell_double(row, lat, what), cell_double(row, lon, what)};
}

inline std::string opt_num(const std::optional<double>& v) { return v ? format_exact(*v) : ""; }

inline std::string join(const std::set<std::string>& items, char sep = ';') {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out.push_back(sep);
        out += s;
    }
    return out;
}

inline std::set<std::string> split(std::string_view s, char sep = ';') {
    std::set<std::string> out;
    while (!s.empty()) {
        auto p = s.find(sep);
        auto part = s.substr(0, p);
        if (!part.empty()) out.emplace(part);
        if (p == std::string_view::npos) break;
        s.remove_prefix(p + 1);
    }
    return out;
}

inline std::string padded_id(char prefix, std::size_t n) {
    std::string s = std::to_string(n);
    return std::string(1, prefix) + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

inline void add_run_config(LayerTransaction& tx, const PipelineConfig& cfg, int layer, const std::string& input_digest) {
    Table t = config_table(cfg);
    t.rows.push_back({"layer", std::to_string(layer)});
    t.rows.push_back({"input_digest", input_digest});
    tx.put("run_config", std::move(t));
}

} // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Readers for tables a higher layer consumes.

inline ObservationWindow read_window(const KnowledgeBase& kb, int reader) {
    Table t = kb.read(raw_layer, "window", reader);
    if (t.rows.size() != 1) throw DataError("layer0/window must hold one row");
    auto a = Date::parse(t.rows[0][t.column("first_date")]);
    auto b = Date::parse(t.rows[0][t.column("last_date")]);
    if (!a || !b || *b < *a) throw DataError("layer0/window is malformed");
    return ObservationWindow::days_from(*a, (*b - *a) + 1);
}

inline CdrDataset read_dataset(const KnowledgeBase& kb, int reader) {
    auto window = read_window(kb, reader);
    return dataset_from_table(kb.read(raw_layer, "cdr", reader), window);
}

inline Weekday read_weekend(const KnowledgeBase& kb, int reader) {
    Table t = kb.read(1, "weekend", reader);
    auto iw = t.column("weekday"), is = t.column("selected");
    for (const auto& row : t.rows)
        if (row[is] == "1") {
            auto d = parse_weekday(row[iw]);
            if (!d) throw DataError("layer1/weekend names an unknown weekday");
            return *d;
        }
    throw DataError("layer1/weekend has no selected day");
}

inline CityPeriods city_periods(const PipelineConfig& cfg, Weekday weekend) {
    return CityPeriods::make(cfg.working_hours, cfg.off_hours, weekend);
}

inline Table places_table(const std::vector<UserPlaces>& places) {
    Table t{{"user_id", "home_lat", "home_lon", "work_lat", "work_lon", "n_pois"}};
    for (const auto& p : places)
        t.rows.push_back({p.user, format_exact(p.home.lat), format_exact(p.home.lon),
                          p.workplace ? format_exact(p.workplace->lat) : "", p.workplace ? format_exact(p.workplace->lon) : "",
                          std::to_string(p.pois.size())});
    return t;
}

inline Table pois_table(const std::vector<UserPlaces>& places) {
    Table t{{"user_id", "poi", "centroid_lat", "centroid_lon", "weight_fraction", "mu_off", "mu_work", "mu_total", "members"}};
    for (const auto& p : places)
        for (std::size_t i = 0; i < p.pois.size(); ++i) {
            const auto& q = p.pois[i];
            std::vector<GeoPoint> members;
            for (const auto& m : q.members) members.push_back(m.loc);
            t.rows.push_back({p.user, std::to_string(i), format_exact(q.centroid.lat), format_exact(q.centroid.lon),
                              format_exact(q.weight_fraction), format_exact(q.mu_off), format_exact(q.mu_work),
                              format_exact(q.mu_total), format_point_list(members)});
        }
    return t;
}

/// Rebuilds per-user places from `layer2/user_places` and `layer2/user_pois`.
/// POI members carry their locations only.
inline std::vector<UserPlaces> read_places(const KnowledgeBase& kb, int reader) {
    using namespace pipeline_detail;
    Table up = kb.read(2, "user_places", reader);
    Table pp = kb.read(2, "user_pois", reader);
    std::map<std::string, UserPlaces> by_user;
    const auto iu = up.column("user_id"), ihl = up.column("home_lat"), iho = up.column("home_lon"),
               iwl = up.column("work_lat"), iwo = up.column("work_lon");
    for (const auto& row : up.rows) {
        UserPlaces p;
        p.user = row[iu];
        p.home = *cell_point(row, ihl, iho, "home");
        p.workplace = cell_point(row, iwl, iwo, "workplace");
        by_user[p.user] = std::move(p);
    }
    const auto ju = pp.column("user_id"), jcl = pp.column("centroid_lat"), jco = pp.column("centroid_lon"),
               jw = pp.column("weight_fraction"), jo = pp.column("mu_off"), jk = pp.column("mu_work"),
               jt = pp.column("mu_total"), jm = pp.column("members");
    for (const auto& row : pp.rows) {
        auto it = by_user.find(row[ju]);
        if (it == by_user.end()) throw DataError("layer2/user_pois names unknown user '" + row[ju] + "'");
        Poi q;
        q.centroid = *cell_point(row, jcl, jco, "centroid");
        q.weight_fraction = cell_double(row, jw, "weight_fraction");
        q.mu_off = cell_double(row, jo, "mu_off");
        q.mu_work = cell_double(row, jk, "mu_work");
        q.mu_total = cell_double(row, jt, "mu_total");
        auto members = parse_point_list(row[jm]);
        if (!members) throw DataError("layer2/user_pois has a malformed member list");
        for (const auto& m : *members) q.members.push_back({m});
        it->second.pois.push_back(std::move(q));
    }
    std::vector<UserPlaces> out;
    for (auto& [_, p] : by_user) out.push_back(std::move(p));
    return out;
}

inline std::map<std::string, WorkerClass> read_worker_classes(const KnowledgeBase& kb, int reader) {
    using namespace pipeline_detail;
    Table t = kb.read(3, "worker_class", reader);
    const auto iu = t.column("user_id"), ik = t.column("kind"), ic = t.column("commute_km");
    std::map<std::string, WorkerClass> out;
    for (const auto& row : t.rows) {
        WorkerClass w;
        w.user = row[iu];
        auto k = parse_worker_kind(row[ik]);
        if (!k) throw DataError("layer3/worker_class has unknown kind '" + row[ik] + "'");
        w.kind = *k;
        w.commute_km = cell_opt_double(row, ic, "commute_km");
        if (w.commute_km) w.bucket = distance_bucket(*w.commute_km);
        out[w.user] = w;
    }
    return out;
}

inline Table trips_table(const std::map<std::string, std::vector<Trip>>& trips) {
    Table t{{"user_id", "date", "leg", "seq", "time", "lat", "lon"}};
    for (const auto& [user, list] : trips)
        for (const auto& trip : list) {
            std::vector<const Fix*> fixes{&trip.start};
            for (const auto& f : trip.en_route) fixes.push_back(&f);
            fixes.push_back(&trip.end);
            for (std::size_t i = 0; i < fixes.size(); ++i)
                t.rows.push_back({user, trip.date.str(), std::string(to_string(trip.leg)), std::to_string(i),
                                  fixes[i]->instant.time().str(), format_exact(fixes[i]->loc.lat),
                                  format_exact(fixes[i]->loc.lon)});
        }
    return t;
}

inline std::map<std::string, std::vector<Trip>> read_trips(const KnowledgeBase& kb, int reader) {
    using namespace pipeline_detail;
    Table t = kb.read(3, "commute_calls", reader);
    const auto iu = t.column("user_id"), id = t.column("date"), il = t.column("leg"), it = t.column("time"),
               ila = t.column("lat"), ilo = t.column("lon"), is = t.column("seq");
    std::map<std::string, std::vector<Trip>> out;
    std::vector<Fix> current;
    auto flush = [&](const std::string& user, Date d, Leg leg) {
        if (current.size() < 2) throw DataError("layer3/commute_calls has a trip with fewer than two calls");
        Trip trip{d, leg, current.front(), current.back(), {}};
        trip.en_route.assign(current.begin() + 1, current.end() - 1);
        out[user].push_back(std::move(trip));
        current.clear();
    };
    std::string user;
    Date date;
    Leg leg = Leg::to_work;
    for (const auto& row : t.rows) {
        if (row[is] == "0" && !current.empty()) flush(user, date, leg);
        auto d = Date::parse(row[id]);
        auto tm = TimeOfDay::parse(row[it]);
        if (!d || !tm) throw DataError("layer3/commute_calls has a malformed instant");
        user = row[iu];
        date = *d;
        leg = row[il] == "to_home" ? Leg::to_home : Leg::to_work;
        current.push_back({Instant{*d, *tm}, *cell_point(row, ila, ilo, "commute call")});
    }
    if (!current.empty()) flush(user, date, leg);
    return out;
}

/// Usage-score rows keyed by (user, window label).
inline std::map<std::pair<std::string, std::string>, double> read_usage_scores(const KnowledgeBase& kb, int reader) {
    Table t = kb.read(1, "usage_scores", reader);
    const auto iu = t.column("user_id"), iw = t.column("window"), is = t.column("score");
    std::map<std::pair<std::string, std::string>, double> out;
    for (const auto& row : t.rows) out[{row[iu], row[iw]}] = pipeline_detail::cell_double(row, is, "score");
    return out;
}

inline CallGraph read_call_graph(const KnowledgeBase& kb, int reader) {
    Table nodes = kb.read(1, "call_graph_nodes", reader);
    Table t = kb.read(1, "call_matches", reader);
    CallGraph g;
    for (const auto& row : nodes.rows) g.nodes.push_back(row.at(0));
    const auto ia = t.column("user_a"), ib = t.column("user_b"), id = t.column("date"), it = t.column("time"),
               idur = t.column("duration");
    for (const auto& row : t.rows) {
        auto d = Date::parse(row[id]);
        auto tm = TimeOfDay::parse(row[it]);
        auto dur = parse_double(row[idur]);
        if (!d || !tm || !dur) throw DataError("layer1/call_matches has a malformed row");
        g.edges[make_pair_key(row[ia], row[ib])].push_back({Instant{*d, *tm}, static_cast<std::int32_t>(*dur)});
    }
    return g;
}

// ---------------------------------------------------------------------------
// Profiles, shared by layers 4 and 5.

inline Table profiles_table(const std::vector<SocialProfile>& profiles) {
    using namespace pipeline_detail;
    Table t{{"user_id", "kind", "home_lat", "home_lon", "work_lat", "work_lon", "commute_km", "working_hours", "off_day",
             "transport", "social_groups"}};
    for (const auto& p : profiles)
        t.rows.push_back({p.user, std::string(to_string(p.kind)), format_exact(p.home.lat), format_exact(p.home.lon),
                          p.workplace ? format_exact(p.workplace->lat) : "", p.workplace ? format_exact(p.workplace->lon) : "",
                          opt_num(p.commute_km), p.working_hours ? p.working_hours->span_str() : "",
                          p.off_day ? std::string(to_string(*p.off_day)) : "",
                          p.transport ? std::string(to_string(*p.transport)) : "", join(p.social_groups)});
    return t;
}

inline std::vector<SocialProfile> parse_profiles(const Table& t) {
    using namespace pipeline_detail;
    const auto iu = t.column("user_id"), ik = t.column("kind"), ihl = t.column("home_lat"), iho = t.column("home_lon"),
               iwl = t.column("work_lat"), iwo = t.column("work_lon"), ic = t.column("commute_km"),
               iwh = t.column("working_hours"), iod = t.column("off_day"), itr = t.column("transport"),
               isg = t.column("social_groups");
    std::vector<SocialProfile> out;
    for (const auto& row : t.rows) {
        SocialProfile p;
        p.user = row[iu];
        auto k = parse_worker_kind(row[ik]);
        if (!k) throw DataError("profile has unknown kind '" + row[ik] + "'");
        p.kind = *k;
        p.home = *cell_point(row, ihl, iho, "home");
        p.workplace = cell_point(row, iwl, iwo, "workplace");
        p.commute_km = cell_opt_double(row, ic, "commute_km");
        if (!row[iwh].empty()) p.working_hours = TimeWindow::parse_span(WindowLabel::working_hours, row[iwh]);
        if (!row[iod].empty()) p.off_day = parse_weekday(row[iod]);
        if (!row[itr].empty()) p.transport = parse_transport(row[itr]);
        p.social_groups = split(row[isg]);
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layer windows.

struct NamedPeriod {
    std::string name;
    Period period;
};

/// Windows scored in layer 1: the whole window, working and off-hours, the
/// late-night window and the four day-part slots.
inline std::vector<NamedPeriod> score_windows(const PipelineConfig& cfg, Weekday weekend) {
    auto periods = city_periods(cfg, weekend);
    std::vector<NamedPeriod> out{{"ALL", Period::all()},
                                 {"WORKING_HOURS", periods.working},
                                 {"OFF_HOURS", periods.off},
                                 {"LATE_NIGHT", Period::of(cfg.late_night)}};
    for (const auto& s : default_day_slots()) out.push_back({std::string(to_string(s.label())), Period::of(s)});
    return out;
}

// ---------------------------------------------------------------------------
// Ingest (layer 0).

inline std::vector<CommitReceipt> run_ingest(KnowledgeBase& kb, const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.input.empty()) throw ConfigError("ingest needs an input file (--input)");
    ParseOptions opt;
    opt.dedup = cfg.dedup;
    std::optional<ObservationWindow> declared;
    if (cfg.window_start && cfg.window_end)
        declared = ObservationWindow::days_from(*cfg.window_start, (*cfg.window_end - *cfg.window_start) + 1);
    ObservationWindow wide = declared.value_or(ObservationWindow{Instant{std::int64_t{0}}, Instant{std::int64_t{1} << 40}});
    if (!declared && cfg.window_start) wide.start = Instant{*cfg.window_start, TimeOfDay{0}};
    if (!declared && cfg.window_end) wide.end = Instant{*cfg.window_end + 1, TimeOfDay{0}} + (-1);
    auto parsed = parse_cdr_file(cfg.input, wide, opt);
    if (parsed.dataset.empty()) throw DataError("input '" + cfg.input + "' holds no valid records");
    Date first = cfg.window_start.value_or(parsed.dataset.records().front().date);
    Date last = cfg.window_end.value_or(parsed.dataset.records().back().date);
    CdrDataset ds(std::vector<CdrRecord>(parsed.dataset.records()), ObservationWindow::days_from(first, (last - first) + 1));
    LayerTransaction tx(kb, raw_layer);
    tx.put("cdr", dataset_table(ds));
    tx.put("rejections", rejections_table(parsed.rejected));
    tx.put("window", Table{{"first_date", "last_date"}, {{first.str(), last.str()}}});
    pipeline_detail::add_run_config(tx, cfg, raw_layer, sha256_file(cfg.input));
    return tx.commit();
}

inline std::string input_digest(const KnowledgeBase& kb) { return kb.table_digest(raw_layer, "cdr"); }

// ---------------------------------------------------------------------------
// Layer 1: usage scores, activity classes, temporal histogram, weekend, call graph.

inline std::vector<CommitReceipt> run_layer1(KnowledgeBase& kb, const PipelineConfig& cfg) {
    cfg.validate();
    constexpr int L = 1;
    auto ds = read_dataset(kb, L);
    auto logs = build_user_logs(ds);
    LayerTransaction tx(kb, L);

    auto daily = daily_usage(ds, cfg.usage);
    Weekday weekend;
    Table wk{{"weekday", "mean_usage", "candidate", "selected", "ambiguous"}};
    std::optional<WeekendDetection> det;
    if (daily.size() >= 14) det = detect_weekend(daily);
    if (!det && !cfg.weekend) throw DataError("weekend detection needs at least 14 days; set weekend in the config");
    weekend = cfg.weekend.value_or(det ? det->day : Weekday::sunday);
    for (int w = 0; w < 7; ++w) {
        auto day = static_cast<Weekday>(w);
        bool cand = det && std::find(det->candidates.begin(), det->candidates.end(), day) != det->candidates.end();
        wk.rows.push_back({std::string(to_string(day)), det ? format_exact(det->mean_usage[w]) : "", cand ? "1" : "0",
                           day == weekend ? "1" : "0", det && det->ambiguous ? "1" : "0"});
    }
    tx.put("weekend", std::move(wk));
    Table du{{"date", "score"}};
    for (const auto& [d, mu] : daily) du.rows.push_back({d.str(), format_exact(mu)});
    tx.put("daily_usage", std::move(du));

    auto windows = score_windows(cfg, weekend);
    Table us{{"user_id", "window", "score", "num_calls", "total_duration"}};
    std::vector<std::pair<std::string, double>> totals;
    for (const auto& log : logs)
        for (const auto& w : windows) {
            auto s = usage_score(log, w.period, std::nullopt, cfg.usage);
            us.rows.push_back({log.user, w.name, format_exact(s.score), std::to_string(s.num_calls),
                               std::to_string(s.total_duration)});
            if (w.name == "ALL") totals.push_back({log.user, s.score});
        }
    tx.put("usage_scores", std::move(us));

    std::vector<double> values;
    for (const auto& [_, mu] : totals) values.push_back(mu);
    double t_low = 0.0, t_high = 0.0;
    std::string source;
    if (cfg.activity_t_low) {
        t_low = *cfg.activity_t_low;
        t_high = *cfg.activity_t_high;
        source = "absolute";
    } else {
        std::tie(t_low, t_high) = quantile_thresholds(values, cfg.activity_q_low, cfg.activity_q_high);
        source = "quantile";
    }
    Table ac{{"user_id", "score", "class"}};
    auto classes = classify_activity(totals, t_low, t_high);
    for (std::size_t i = 0; i < classes.size(); ++i)
        ac.rows.push_back({classes[i].user, format_exact(totals[i].second), std::string(to_string(classes[i].cls))});
    tx.put("activity_class", std::move(ac));
    tx.put("activity_thresholds", Table{{"t_low", "t_high", "source"}, {{format_exact(t_low), format_exact(t_high), source}}});

    auto slots = default_day_slots();
    auto hist = temporal_histogram(ds, slots);
    Table th{{"scope", "slot", "num_calls", "active_users"}};
    for (std::size_t s = 0; s < slots.size(); ++s)
        th.rows.push_back({"ALL", std::string(to_string(slots[s].label())), std::to_string(hist.totals[s].calls),
                           std::to_string(hist.totals[s].active_users)});
    for (const auto& [d, counts] : hist.per_day)
        for (std::size_t s = 0; s < slots.size(); ++s)
            th.rows.push_back({d.str(), std::string(to_string(slots[s].label())), std::to_string(counts[s].calls),
                               std::to_string(counts[s].active_users)});
    tx.put("temporal_histogram", std::move(th));

    auto graph = reconstruct_call_graph(ds, cfg.match_tolerance_s);
    Table cg{{"user_a", "user_b", "weight"}};
    Table cm{{"user_a", "user_b", "date", "time", "duration"}};
    for (const auto& [pair, calls] : graph.edges) {
        cg.rows.push_back({pair.first, pair.second, std::to_string(calls.size())});
        for (const auto& c : calls)
            cm.rows.push_back({pair.first, pair.second, c.instant.date().str(), c.instant.time().str(),
                               std::to_string(c.duration)});
    }
    Table nodes{{"user_id"}};
    for (const auto& n : graph.nodes) nodes.rows.push_back({n});
    tx.put("call_graph", std::move(cg));
    tx.put("call_matches", std::move(cm));
    tx.put("call_graph_nodes", std::move(nodes));
    tx.put("user_logs", user_logs_table(logs));
    pipeline_detail::add_run_config(tx, cfg, L, input_digest(kb));
    return tx.commit();
}

// ---------------------------------------------------------------------------
// Layer 2: POIs, home and workplace, zone busyness.

inline std::vector<CommitReceipt> run_layer2(KnowledgeBase& kb, const PipelineConfig& cfg) {
    cfg.validate();
    constexpr int L = 2;
    auto ds = read_dataset(kb, L);
    auto weekend = read_weekend(kb, L);
    auto periods = city_periods(cfg, weekend);
    auto logs = build_user_logs(ds);
    std::vector<UserPlaces> places;
    places.reserve(logs.size());
    for (const auto& log : logs) places.push_back(user_places(log, periods, cfg.usage, cfg.place_options()));
    LayerTransaction tx(kb, L);
    tx.put("user_places", places_table(places));
    tx.put("user_pois", pois_table(places));

    auto slots = default_day_slots();
    std::vector<Period> windows;
    for (const auto& s : slots) windows.push_back(Period::of(s));
    auto zones = zone_profiles(ds, windows);
    Table zb{{"zone_lat", "zone_lon", "window", "num_calls", "active_users", "busy_class"}};
    Table bm{{"window", "degenerate", "seeds", "w_calls", "w_users", "bias"}};
    for (std::size_t w = 0; w < slots.size(); ++w) {
        auto model = train_busy_model(zones, w, cfg.train_options());
        std::string name(to_string(slots[w].label()));
        bm.rows.push_back({name, model.degenerate ? "1" : "0", std::to_string(model.seeds),
                           model.model ? format_exact(model.model->weights[0]) : "",
                           model.model ? format_exact(model.model->weights[1]) : "",
                           model.model ? format_exact(model.model->bias) : ""});
        for (const auto& z : zones)
            zb.rows.push_back({format_exact(z.zone.lat), format_exact(z.zone.lon), name, std::to_string(z.per_window[w].calls),
                               std::to_string(z.per_window[w].active_users),
                               std::string(to_string(classify_zone_busyness(model, z.per_window[w])))});
    }
    tx.put("zone_busyness", std::move(zb));
    tx.put("busy_models", std::move(bm));
    pipeline_detail::add_run_config(tx, cfg, L, input_digest(kb));
    return tx.commit();
}

// ---------------------------------------------------------------------------
// Layer 3: worker kind, commute distance, routes, zone types.

inline std::vector<CommitReceipt> run_layer3(KnowledgeBase& kb, const PipelineConfig& cfg) {
    cfg.validate();
    constexpr int L = 3;
    auto places = read_places(kb, L);
    auto ds = read_dataset(kb, L);
    auto weekend = read_weekend(kb, L);
    auto periods = city_periods(cfg, weekend);
    auto logs = build_user_logs(ds);
    std::map<std::string, const UserLog*> log_of;
    for (const auto& l : logs) log_of[l.user] = &l;

    std::vector<WorkerFeatures> feats;
    for (const auto& p : places) {
        auto it = log_of.find(p.user);
        if (it == log_of.end()) throw DataError("layer2 names user '" + p.user + "' absent from layer0");
        feats.push_back(worker_features(*it->second, p, periods, cfg.usage, cfg.presence_radius_km));
    }
    auto model = train_worker_model(feats, cfg.regularity_threshold, cfg.train_options());
    Table wf{{"user_id", "has_workplace", "regularity", "work_share"}};
    Table wc{{"user_id", "kind", "commute_km", "bucket"}};
    std::map<std::string, std::vector<Trip>> trips;
    Table routes{{"user_id", "route", "km", "en_route_calls"}};
    const auto max_gap = static_cast<std::int64_t>(std::llround(cfg.commute_max_gap_h * 3600.0));
    for (std::size_t i = 0; i < places.size(); ++i) {
        const auto& p = places[i];
        const auto& f = feats[i];
        wf.rows.push_back({p.user, format_exact(f.has_workplace), format_exact(f.regularity), format_exact(f.work_share)});
        auto c = classify_worker(p, f, model);
        wc.rows.push_back({p.user, std::string(to_string(c.kind)), pipeline_detail::opt_num(c.commute_km),
                           c.bucket ? std::string(*c.bucket) : (c.commute_km ? ">=100" : "")});
        if (!p.workplace) continue;
        auto t = commute_trips(*log_of.at(p.user), p.home, *p.workplace, max_gap);
        auto r = predict_route(p.home, *p.workplace, t, cfg.route_k);
        std::size_t en_route = 0;
        for (const auto& trip : t) en_route += trip.en_route.size();
        routes.rows.push_back({p.user, format_point_list(r.points), format_exact(r.km), std::to_string(en_route)});
        if (!t.empty()) trips[p.user] = std::move(t);
    }
    LayerTransaction tx(kb, L);
    tx.put("worker_features", std::move(wf));
    tx.put("worker_class", std::move(wc));
    tx.put("worker_model",
           Table{{"regularity_threshold", "trained", "w_has_workplace", "w_regularity", "w_work_share", "bias"},
                 {{format_exact(model.regularity_threshold), model.model ? "1" : "0",
                   model.model ? format_exact(model.model->weights[0]) : "",
                   model.model ? format_exact(model.model->weights[1]) : "",
                   model.model ? format_exact(model.model->weights[2]) : "",
                   model.model ? format_exact(model.model->bias) : ""}}});
    tx.put("commute_calls", trips_table(trips));
    tx.put("routes", std::move(routes));

    std::map<GeoPoint, ZoneTypeFeatures> zf;
    for (const auto& t : ds.towers()) zf[t].zone = t;
    std::map<GeoPoint, std::pair<std::int64_t, std::int64_t>> off_work;
    for (const auto& r : ds.records()) {
        auto& ow = off_work[r.loc()];
        if (periods.off.contains(r.instant())) ow.first += 1;
        if (periods.working.contains(r.instant())) ow.second += 1;
    }
    for (const auto& p : places) {
        zf[p.home].home_count += 1;
        if (p.workplace) zf[*p.workplace].work_count += 1;
    }
    std::vector<ZoneTypeFeatures> zones;
    for (auto& [loc, f] : zf) {
        auto [off, work] = off_work[loc];
        f.zone = loc;
        f.off_work_ratio = static_cast<double>(off) / static_cast<double>(std::max<std::int64_t>(work, 1));
        zones.push_back(f);
    }
    auto zmodel = train_zone_type_model(zones, cfg.train_options());
    Table zt{{"zone_lat", "zone_lon", "home_count", "work_count", "off_work_ratio", "zone_type"}};
    for (const auto& z : zones)
        zt.rows.push_back({format_exact(z.zone.lat), format_exact(z.zone.lon), format_exact(z.home_count),
                           format_exact(z.work_count), format_exact(z.off_work_ratio),
                           std::string(to_string(classify_zone_type(z, zmodel)))});
    tx.put("zone_type", std::move(zt));
    pipeline_detail::add_run_config(tx, cfg, L, input_digest(kb));
    return tx.commit();
}

// ---------------------------------------------------------------------------
// Layer 4: location groups, special groups, transport, working days, profiles.

inline std::vector<CommitReceipt> run_layer4(KnowledgeBase& kb, const PipelineConfig& cfg) {
    using namespace pipeline_detail;
    cfg.validate();
    constexpr int L = 4;
    auto workers = read_worker_classes(kb, L);
    auto trips = read_trips(kb, L);
    auto places = read_places(kb, L);
    auto scores = read_usage_scores(kb, L);
    auto ds = read_dataset(kb, L);
    auto logs = build_user_logs(ds);
    std::map<std::string, const UserLog*> log_of;
    for (const auto& l : logs) log_of[l.user] = &l;
    std::optional<Gazetteer> gaz;
    if (!cfg.gazetteer.empty()) gaz = Gazetteer::load(cfg.gazetteer);

    std::map<std::string, WorkerKind> kinds;
    for (const auto& [u, w] : workers) kinds[u] = w.kind;
    std::map<std::string, std::set<std::string>> labels;
    Table groups{{"group_id", "kind", "user_id"}};
    auto emit_groups = [&](const std::vector<std::vector<std::string>>& gs, char prefix, std::string_view kind) {
        for (std::size_t g = 0; g < gs.size(); ++g) {
            std::string gid = padded_id(prefix, g + 1);
            for (const auto& u : gs[g]) {
                groups.rows.push_back({gid, std::string(kind), u});
                labels[u].insert(std::string(kind) + ":" + gid);
            }
        }
    };
    emit_groups(neighbor_groups(places, cfg.neighbor_radius_km), 'N', "NEIGHBOR");
    emit_groups(colleague_groups(places, kinds, cfg.colleague_radius_km), 'C', "COLLEAGUE");

    auto score_of = [&](const std::string& u, const char* w) {
        auto it = scores.find({u, w});
        return it == scores.end() ? 0.0 : it->second;
    };
    std::vector<UserSignals> signals;
    for (const auto& p : places) {
        UserSignals s;
        s.user = p.user;
        s.mu_total = score_of(p.user, "ALL");
        s.mu_late_night = score_of(p.user, "LATE_NIGHT");
        s.mu_working = score_of(p.user, "WORKING_HOURS");
        s.towers_per_day = towers_per_active_day(*log_of.at(p.user));
        s.regular = kinds[p.user] == WorkerKind::regular;
        signals.push_back(s);
    }
    auto special = special_groups(signals, cfg.special);

    std::vector<SpeedSummary> speed_rows;
    std::map<std::string, std::optional<SpeedSummary>> speeds;
    for (const auto& [u, t] : trips) {
        speeds[u] = trip_speeds(t);
        if (speeds[u]) speed_rows.push_back(*speeds[u]);
    }
    auto tmodel = train_transport_model(speed_rows, cfg.transport, cfg.train_options());
    Table transport{{"user_id", "avg_kmh", "peak_kmh", "samples", "transport"}};
    std::map<std::string, std::optional<Transport>> modes;
    for (const auto& [u, s] : speeds) {
        auto mode = classify_transport(s, tmodel);
        modes[u] = mode;
        transport.rows.push_back({u, s ? format_exact(s->avg_kmh) : "", s ? format_exact(s->peak_kmh) : "",
                                  std::to_string(s ? s->samples : 0), mode ? std::string(to_string(*mode)) : ""});
    }

    const auto window = ds.window();
    const Date first = window.start.date(), last = window.end.date();
    Table wd{{"user_id", "working_days", "off_day", "ambiguous", "working_hours"}};
    std::vector<SocialProfile> profiles;
    for (const auto& p : places) {
        SocialProfile prof;
        prof.user = p.user;
        prof.kind = kinds[p.user];
        prof.home = p.home;
        prof.workplace = p.workplace;
        const auto& log = *log_of.at(p.user);
        if (prof.kind == WorkerKind::regular && p.workplace) {
            prof.commute_km = workers.at(p.user).commute_km;
            std::set<Date> present;
            std::vector<TimeOfDay> at_work;
            for (const auto& e : log.entries) {
                if (haversine_km(e.loc, *p.workplace) > cfg.presence_radius_km) continue;
                if (cfg.working_hours.contains(e.instant.time())) present.insert(e.instant.date());
                at_work.push_back(e.instant.time());
            }
            std::vector<std::pair<Date, bool>> presence;
            for (Date d = first; d <= last; d = d + 1) presence.push_back({d, present.count(d) > 0});
            if (last - first + 1 >= 14) {
                auto days = detect_working_days(presence);
                prof.off_day = days.off_day;
                std::string list;
                for (auto w : days.working) list += (list.empty() ? "" : ";") + std::string(to_string(w));
                prof.working_hours = estimate_working_hours(at_work);
                wd.rows.push_back({p.user, list, std::string(to_string(days.off_day)), days.ambiguous ? "1" : "0",
                                   prof.working_hours ? prof.working_hours->span_str() : ""});
            }
        }
        if (auto it = modes.find(p.user); it != modes.end() && prof.kind == WorkerKind::regular) prof.transport = it->second;
        double home_share = 0.0, total = 0.0;
        for (const auto& q : p.pois) {
            total += q.mu_total;
            if (std::any_of(q.members.begin(), q.members.end(), [&](const PoiMember& m) { return m.loc == p.home; }))
                home_share += q.mu_total;
        }
        home_share = total > 0.0 ? home_share / total : 0.0;
        auto& ls = labels[p.user];
        if (auto occ = occupational_label(prof.kind, p.workplace.has_value(), home_share, cfg.homemaker_home_share))
            ls.emplace(*occ);
        for (const auto& s : special[p.user]) ls.insert(s);
        if (gaz && p.workplace && prof.kind == WorkerKind::regular)
            for (const auto& c : gaz->categories(*p.workplace)) ls.insert("AREA:" + c);
        prof.social_groups = ls;
        profiles.push_back(std::move(prof));
    }
    for (const auto& prof : profiles)
        for (const auto& l : prof.social_groups)
            if (l.find(':') == std::string::npos) groups.rows.push_back({l, l, prof.user});
    std::sort(groups.rows.begin(), groups.rows.end());

    LayerTransaction tx(kb, L);
    tx.put("groups", std::move(groups));
    tx.put("transport", std::move(transport));
    tx.put("working_days", std::move(wd));
    tx.put("profiles", profiles_table(profiles));
    add_run_config(tx, cfg, L, input_digest(kb));
    return tx.commit();
}

// ---------------------------------------------------------------------------
// Layer 5: closeness, family and friends, final profiles.

inline std::vector<CommitReceipt> run_layer5(KnowledgeBase& kb, const PipelineConfig& cfg) {
    using namespace pipeline_detail;
    cfg.validate();
    constexpr int L = 5;
    auto profiles = parse_profiles(kb.read(4, "profiles", L));
    auto places = read_places(kb, L);
    auto graph = read_call_graph(kb, L);
    auto weekend = read_weekend(kb, L);
    auto periods = city_periods(cfg, weekend);
    std::map<std::string, const UserPlaces*> place_of;
    for (const auto& p : places) place_of[p.user] = &p;

    auto stats = edge_stats(graph, periods.off);
    auto strengths = call_strengths(stats);
    std::vector<ClosenessScore> scores;
    Table cl{{"user_a", "user_b", "score", "call_strength", "co_home", "co_work", "co_poi_count", "off_hours_fraction"}};
    for (const auto& [pair, s] : stats) {
        auto ia = place_of.find(pair.first), ib = place_of.find(pair.second);
        if (ia == place_of.end() || ib == place_of.end()) throw DataError("call graph names a user without places");
        const auto& a = *ia->second;
        const auto& b = *ib->second;
        ClosenessComponents c;
        auto cs = call_strength(stats, strengths, pair.first, pair.second);
        c.call_strength = cs.strength;
        c.off_hours_fraction = cs.off_hours_fraction;
        c.co_home = haversine_km(a.home, b.home) <= cfg.neighbor_radius_km;
        c.co_work = a.workplace && b.workplace && haversine_km(*a.workplace, *b.workplace) <= cfg.colleague_radius_km;
        for (const auto& pa : a.pois)
            if (std::any_of(b.pois.begin(), b.pois.end(), [&](const Poi& pb) {
                    return haversine_km(pa.centroid, pb.centroid) <= cfg.places.merge_radius_km;
                }))
                ++c.co_poi_count;
        double score = closeness(c, cfg.closeness);
        scores.push_back({pair, c, score});
        cl.rows.push_back({pair.first, pair.second, format_exact(score), format_exact(c.call_strength),
                           c.co_home ? "1" : "0", c.co_work ? "1" : "0", std::to_string(c.co_poi_count),
                           format_exact(c.off_hours_fraction)});
    }
    auto ff = detect_family_friends(scores, cfg.family_friends);
    Table fft{{"group_id", "kind", "user_id"}};
    std::map<std::string, std::set<std::string>> extra;
    std::size_t nf = 0, nr = 0;
    for (const auto& g : ff) {
        std::string gid = g.kind == "FAMILY" ? padded_id('F', ++nf) : padded_id('R', ++nr);
        for (const auto& u : g.members) {
            fft.rows.push_back({gid, g.kind, u});
            extra[u].insert(g.kind + ":" + gid);
        }
    }
    for (auto& p : profiles)
        if (auto it = extra.find(p.user); it != extra.end()) p.social_groups.insert(it->second.begin(), it->second.end());
    LayerTransaction tx(kb, L);
    tx.put("closeness", std::move(cl));
    tx.put("family_friends", std::move(fft));
    tx.put("profiles", profiles_table(profiles));
    add_run_config(tx, cfg, L, input_digest(kb));
    return tx.commit();
}

inline std::vector<CommitReceipt> run_layer(KnowledgeBase& kb, const PipelineConfig& cfg, int layer) {
    switch (layer) {
    case 0: return run_ingest(kb, cfg);
    case 1: return run_layer1(kb, cfg);
    case 2: return run_layer2(kb, cfg);
    case 3: return run_layer3(kb, cfg);
    case 4: return run_layer4(kb, cfg);
    case 5: return run_layer5(kb, cfg);
    default: throw ConfigError("no such layer " + std::to_string(layer));
    }
}

inline std::vector<CommitReceipt> run_all(KnowledgeBase& kb, const PipelineConfig& cfg) {
    std::vector<CommitReceipt> out;
    for (int l = raw_layer; l <= max_layer; ++l) {
        auto r = run_layer(kb, cfg, l);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

} // namespace cdrx
