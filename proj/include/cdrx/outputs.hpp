#pragma once

#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/geo.hpp"
#include "cdrx/knowledge_base.hpp"
#include "cdrx/pipeline.hpp"
#include "cdrx/places.hpp"
#include "cdrx/social.hpp"
#include "cdrx/synthgen.hpp"
#include "cdrx/table.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cdrx {

// ---------------------------------------------------------------------------
// Plain-text reports.

namespace report_detail {

/// Left-aligned first column, right-aligned numbers, two-space gutters.
inline std::string render(const std::string& title, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (width.size() <= i) width.push_back(0);
            width[i] = std::max(width[i], r[i].size());
        }
    std::string out = title + "\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::string pad(width[i] - r[i].size(), ' ');
            if (i) line += "  ";
            line += i == 0 ? r[i] + pad : pad + r[i];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
        if (k == 0) {
            std::size_t total = 0;
            for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
            out += std::string(total, '-') + "\n";
        }
    }
    return out + "\n";
}

inline std::string pct(std::size_t n, std::size_t total) {
    return total ? format_fixed(100.0 * static_cast<double>(n) / static_cast<double>(total), 1) : "0.0";
}

} // namespace report_detail

/// Activity classes, day-part slots, worker kinds, commute distances,
/// special groups and transport modes as aligned text tables.
inline std::string render_report(const KnowledgeBase& kb) {
    using namespace report_detail;
    constexpr int R = consumer_layer;
    std::string out;

    Table ac = kb.read(1, "activity_class", R);
    std::map<std::string, std::size_t> by_class;
    for (const auto& row : ac.rows) by_class[row[ac.column("class")]] += 1;
    std::vector<std::vector<std::string>> rows{{"Class", "Users", "Share %"}};
    for (auto c : {ActivityClass::minimal, ActivityClass::regular, ActivityClass::heavy}) {
        std::string name(to_string(c));
        rows.push_back({name, std::to_string(by_class[name]), pct(by_class[name], ac.size())});
    }
    out += render("Activity classes", rows);

    Table th = kb.read(1, "temporal_histogram", R);
    std::int64_t calls = 0;
    std::vector<std::vector<std::string>> slot_rows;
    for (const auto& row : th.rows)
        if (row[th.column("scope")] == "ALL") {
            calls += std::stoll(row[th.column("num_calls")]);
            slot_rows.push_back({row[th.column("slot")], row[th.column("num_calls")], row[th.column("active_users")]});
        }
    rows = {{"Slot", "Calls", "Share %", "Active users"}};
    for (const auto& r : slot_rows)
        rows.push_back({r[0], r[1], pct(static_cast<std::size_t>(std::stoll(r[1])), static_cast<std::size_t>(calls)), r[2]});
    out += render("Time slots", rows);

    auto workers = read_worker_classes(kb, R);
    std::size_t regular = 0;
    std::map<std::string, std::size_t> buckets;
    for (const auto& [_, w] : workers)
        if (w.kind == WorkerKind::regular) {
            ++regular;
            buckets[w.bucket ? std::string(*w.bucket) : ">=100"] += 1;
        }
    rows = {{"Group", "Users", "Share %"},
            {"REGULAR", std::to_string(regular), pct(regular, workers.size())},
            {"IRREGULAR", std::to_string(workers.size() - regular), pct(workers.size() - regular, workers.size())}};
    out += render("Working groups", rows);

    rows = {{"Distance (km)", "Workers", "Share %"}};
    for (const auto& [_, label] : commute_buckets()) {
        std::string l(label);
        rows.push_back({l, std::to_string(buckets[l]), pct(buckets[l], regular)});
    }
    if (buckets.count(">=100")) rows.push_back({">=100", std::to_string(buckets[">=100"]), pct(buckets[">=100"], regular)});
    out += render("Commute distance", rows);

    Table groups = kb.read(4, "groups", R);
    std::map<std::string, std::set<std::string>> per_kind_groups;
    std::map<std::string, std::size_t> per_kind_users;
    for (const auto& row : groups.rows) {
        per_kind_groups[row[groups.column("kind")]].insert(row[groups.column("group_id")]);
        per_kind_users[row[groups.column("kind")]] += 1;
    }
    Table ff = kb.read(5, "family_friends", R);
    for (const auto& row : ff.rows) {
        per_kind_groups[row[ff.column("kind")]].insert(row[ff.column("group_id")]);
        per_kind_users[row[ff.column("kind")]] += 1;
    }
    rows = {{"Group kind", "Groups", "Members"}};
    for (const auto& [kind, ids] : per_kind_groups)
        rows.push_back({kind, std::to_string(ids.size()), std::to_string(per_kind_users[kind])});
    out += render("Social groups", rows);

    Table tr = kb.read(4, "transport", R);
    std::map<std::string, std::size_t> modes;
    for (const auto& row : tr.rows) modes[row[tr.column("transport")].empty() ? "UNKNOWN" : row[tr.column("transport")]] += 1;
    rows = {{"Transport", "Workers", "Share %"}};
    for (const auto& [m, n] : modes) rows.push_back({m, std::to_string(n), pct(n, tr.size())});
    out += render("Transport", rows);
    return out;
}

// ---------------------------------------------------------------------------
// GeoJSON.

enum class ExportKind : std::uint8_t { zones, routes, voronoi };

inline std::optional<ExportKind> parse_export_kind(std::string_view s) {
    if (s == "zones") return ExportKind::zones;
    if (s == "routes") return ExportKind::routes;
    if (s == "voronoi") return ExportKind::voronoi;
    return std::nullopt;
}

namespace geojson_detail {

inline nlohmann::json position(const GeoPoint& p) { return nlohmann::json::array({p.lon, p.lat}); }

inline nlohmann::json ring(const std::vector<GeoPoint>& pts) {
    auto r = nlohmann::json::array();
    for (const auto& p : pts) r.push_back(position(p));
    if (!pts.empty()) r.push_back(position(pts.front()));
    return r;
}

} // namespace geojson_detail

/// Voronoi cells of every tower (zones, voronoi) or one LineString per
/// predicted route. Cells carry the tower's busy class for `window` and its
/// zone type; `zones` also carries the window's call and user counts.
inline nlohmann::json export_geojson(const KnowledgeBase& kb, ExportKind kind, const std::string& window = "MIDDAY") {
    using namespace geojson_detail;
    using nlohmann::json;
    constexpr int R = consumer_layer;
    json features = json::array();
    if (kind == ExportKind::routes) {
        Table t = kb.read(3, "routes", R);
        for (const auto& row : t.rows) {
            auto pts = parse_point_list(row[t.column("route")]);
            if (!pts) throw DataError("layer3/routes has a malformed route");
            json coords = json::array();
            for (const auto& p : *pts) coords.push_back(position(p));
            features.push_back({{"type", "Feature"},
                                {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
                                {"properties", {{"user_id", row[t.column("user_id")]}, {"km", *parse_double(row[t.column("km")])}}}});
        }
        return {{"type", "FeatureCollection"}, {"features", features}};
    }
    Table zb = kb.read(2, "zone_busyness", R);
    Table zt = kb.read(3, "zone_type", R);
    struct Attrs {
        std::string busy;
        std::int64_t calls = 0, users = 0;
        std::string type;
    };
    std::map<GeoPoint, Attrs> attrs;
    bool window_seen = false;
    for (const auto& row : zb.rows) {
        GeoPoint g{*parse_double(row[zb.column("zone_lat")]), *parse_double(row[zb.column("zone_lon")])};
        auto& a = attrs[g];
        if (row[zb.column("window")] != window) continue;
        window_seen = true;
        a.busy = row[zb.column("busy_class")];
        a.calls = std::stoll(row[zb.column("num_calls")]);
        a.users = std::stoll(row[zb.column("active_users")]);
    }
    if (!window_seen && !zb.rows.empty()) throw ConfigError("no busyness computed for window '" + window + "'");
    for (const auto& row : zt.rows) {
        GeoPoint g{*parse_double(row[zt.column("zone_lat")]), *parse_double(row[zt.column("zone_lon")])};
        attrs[g].type = row[zt.column("zone_type")];
    }
    std::vector<GeoPoint> sites;
    for (const auto& [g, _] : attrs) sites.push_back(g);
    if (sites.empty()) return {{"type", "FeatureCollection"}, {"features", features}};
    auto box = BBox::around(sites, 0.005);
    auto vd = voronoi(sites, box);
    for (std::size_t i = 0; i < vd.size(); ++i) {
        const auto& site = vd.sites()[i];
        const auto& a = attrs[site];
        json props{{"site_lat", site.lat}, {"site_lon", site.lon}, {"window", window}, {"busy_class", a.busy},
                   {"zone_type", a.type}};
        if (kind == ExportKind::zones) {
            props["num_calls"] = a.calls;
            props["active_users"] = a.users;
        } else {
            props["area_km2"] = vd.cell_area_km2(i);
        }
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring(vd.cell(i))})}}},
                            {"properties", props}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

// ---------------------------------------------------------------------------
// Scoring against synthetic ground truth.

struct Rate {
    std::size_t hits = 0;
    std::size_t total = 0;
    double percent() const { return total ? 100.0 * static_cast<double>(hits) / static_cast<double>(total) : 0.0; }
    void add(bool ok) {
        ++total;
        hits += ok;
    }
};

struct AccuracyReport {
    Rate home;          // every persona: predicted home tower equals the true one
    Rate workplace;     // regular-worker personas: predicted workplace tower equals the true one
    Rate working_group; // every persona: REGULAR exactly for regular-worker personas
    Rate route;         // workers with intermediate towers: route overlap at least `route_success`
    Rate caller_type;   // every persona: late-night / traveler / neither
    Rate social_group;  // personas with a family or colleague: some predicted group holds a true co-member

    std::vector<std::pair<std::string, const Rate*>> rows() const {
        return {{"home", &home},         {"workplace", &workplace},     {"working_group", &working_group},
                {"route", &route},       {"caller_type", &caller_type}, {"social_group", &social_group}};
    }
};

struct ScoreOptions {
    double route_success = 0.6;
    double route_tolerance_km = 0.1;
};

inline AccuracyReport score_against_truth(const KnowledgeBase& kb, const std::vector<synth::Persona>& truth,
                                          const ScoreOptions& opt = {}) {
    using synth::PersonaKind;
    constexpr int R = consumer_layer;
    std::map<std::string, UserPlaces> places;
    for (auto& p : read_places(kb, R)) places[p.user] = std::move(p);
    auto workers = read_worker_classes(kb, R);
    std::map<std::string, std::vector<GeoPoint>> routes;
    {
        Table t = kb.read(3, "routes", R);
        for (const auto& row : t.rows) {
            auto pts = parse_point_list(row[t.column("route")]);
            if (!pts) throw DataError("layer3/routes has a malformed route");
            routes[row[t.column("user_id")]] = *pts;
        }
    }
    std::map<std::string, std::set<std::string>> labels;
    std::map<std::string, std::set<std::string>> members;
    for (const auto& p : parse_profiles(kb.read(5, "profiles", R))) {
        labels[p.user] = p.social_groups;
        for (const auto& g : p.social_groups)
            if (g.find(':') != std::string::npos) members[g].insert(p.user);
    }
    std::map<std::string, const synth::Persona*> by_user;
    for (const auto& p : truth) by_user[p.user] = &p;

    AccuracyReport rep;
    for (const auto& t : truth) {
        auto pl = places.find(t.user);
        const UserPlaces* up = pl == places.end() ? nullptr : &pl->second;
        rep.home.add(up && up->home == t.home);
        bool worker = t.kind == PersonaKind::regular_worker;
        if (worker) rep.workplace.add(up && up->workplace && t.workplace && *up->workplace == *t.workplace);
        auto wk = workers.find(t.user);
        bool regular = wk != workers.end() && wk->second.kind == WorkerKind::regular;
        rep.working_group.add(regular == worker);
        if (worker && !t.commute_path.empty()) {
            auto r = routes.find(t.user);
            rep.route.add(r != routes.end() && route_overlap(t.commute_path, r->second, opt.route_tolerance_km) >= opt.route_success);
        }
        const auto& ls = labels[t.user];
        int predicted = ls.count(std::string(label_late_night)) ? 1 : ls.count(std::string(label_traveler)) ? 2 : 0;
        int actual = t.kind == PersonaKind::late_night_caller ? 1 : t.kind == PersonaKind::frequent_traveler ? 2 : 0;
        rep.caller_type.add(predicted == actual);
        if (t.family_id || t.colleague_group) {
            bool hit = false;
            for (const auto& g : ls) {
                auto m = members.find(g);
                if (m == members.end()) continue;
                for (const auto& other : m->second) {
                    if (other == t.user) continue;
                    auto o = by_user.find(other);
                    if (o == by_user.end()) continue;
                    const auto& op = *o->second;
                    if ((t.family_id && op.family_id == t.family_id) || (t.colleague_group && op.colleague_group == t.colleague_group))
                        hit = true;
                }
                if (hit) break;
            }
            rep.social_group.add(hit);
        }
    }
    return rep;
}

inline std::string render_scores(const AccuracyReport& rep) {
    std::vector<std::vector<std::string>> rows{{"Attribute", "Correct", "Total", "Accuracy %"}};
    for (const auto& [name, r] : rep.rows())
        rows.push_back({name, std::to_string(r->hits), std::to_string(r->total), format_fixed(r->percent(), 1)});
    return report_detail::render("Accuracy against truth", rows);
}

} // namespace cdrx
