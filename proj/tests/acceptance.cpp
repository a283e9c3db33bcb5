// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "cdrx/cdrx.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace cdrx;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

std::string fmt(double v, int p = 2) { return format_fixed(v, p); }

fs::path scratch() {
    static fs::path p = [] {
        auto d = fs::temp_directory_path() / ("cdrx_accept_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void usage_reproduction() {
    struct Row { std::int64_t calls, duration, us; };
    const Row rows[] = {{22, 3469, 80}, {966, 78429, 2273}, {165, 18731, 477},
                        {50, 6262, 154}, {26, 4201, 96},    {101, 23433, 492}};
    UsageScoreParams p{1.0, 1.0, 60.0};
    int ok = 0;
    std::string got;
    for (const auto& r : rows) {
        auto v = round_half_up(p.score(r.calls, r.duration));
        ok += v == r.us;
        got += (got.empty() ? "" : ",") + std::to_string(v);
    }
    report(1, "usage score", ok == 6, std::to_string(ok) + "/6 exact (" + got + ")");
}

void haversine_reproduction() {
    struct Row { GeoPoint a, b; double km, tol; };
    const Row rows[] = {{{23.846, 90.421}, {23.793, 90.402}, 6.20, 0.03},
                        {{23.710, 90.404}, {23.812, 90.255}, 18.93, 0.03},
                        {{23.789, 90.408}, {23.787, 90.415}, 0.72, 0.05}};
    bool ok = true;
    std::string got;
    for (const auto& r : rows) {
        double d = haversine_km(r.a, r.b);
        ok &= std::abs(d - r.km) <= r.tol;
        got += (got.empty() ? "" : ", ") + fmt(d, 3) + " vs " + fmt(r.km);
    }
    report(2, "haversine", ok, got);
}

// ---------------------------------------------------------------------------

struct Run {
    synth::GeneratedCity city;
    fs::path kb_dir;
    AccuracyReport acc;
    double seconds = 0;
};

Run end_to_end(double noise, const std::string& tag) {
    auto t0 = std::chrono::steady_clock::now();
    Run run;
    synth::CityConfig cc;
    cc.noise = noise;
    run.city = synth::generate_city(cc);
    auto cdr = (scratch() / (tag + ".csv")).string();
    synth::write_city(run.city, cdr, (scratch() / (tag + "_truth.csv")).string());
    run.kb_dir = scratch() / ("kb_" + tag);
    KnowledgeBase kb(run.kb_dir);
    PipelineConfig cfg;
    cfg.input = cdr;
    run_all(kb, cfg);
    run.seconds = seconds_since(t0);
    run.acc = score_against_truth(kb, run.city.personas);
    return run;
}

std::string rates(const AccuracyReport& a) {
    std::string s;
    for (const auto& [name, r] : a.rows()) s += (s.empty() ? "" : " ") + name + "=" + fmt(r->percent(), 1);
    return s;
}

void accuracy(const Run& clean, const Run& noisy) {
    bool ok = clean.acc.home.percent() == 100.0 && clean.acc.workplace.percent() == 100.0;
    ok &= noisy.acc.home.percent() >= 95.0 && noisy.acc.workplace.percent() >= 90.0 &&
          noisy.acc.working_group.percent() >= 80.0 && noisy.acc.route.percent() >= 75.0 &&
          noisy.acc.caller_type.percent() >= 90.0 && noisy.acc.social_group.percent() >= 95.0;
    ok &= clean.seconds < 60.0 && noisy.seconds < 60.0;
    ok &= clean.city.records.size() >= 150000 && clean.city.personas.size() == 500;
    report(3, "synthetic end-to-end", ok,
           std::to_string(clean.city.records.size()) + " records; noise=0 [" + rates(clean.acc) + "] " +
               fmt(clean.seconds, 1) + "s; noise=0.1 [" + rates(noisy.acc) + "] " + fmt(noisy.seconds, 1) + "s");
}

// ---------------------------------------------------------------------------

using EdgeMultiset = std::map<UserPair, std::vector<std::pair<std::int64_t, std::int32_t>>>;

EdgeMultiset edges_of(const CallGraph& g) {
    EdgeMultiset out;
    for (const auto& [pair, calls] : g.edges)
        for (const auto& c : calls) out[pair].push_back({c.instant.seconds(), c.duration});
    for (auto& [_, v] : out) std::sort(v.begin(), v.end());
    return out;
}

EdgeMultiset brute_force_matches(const std::vector<CdrRecord>& recs, std::int64_t tol) {
    EdgeMultiset out;
    std::vector<char> used(recs.size(), 0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (used[i]) continue;
        for (std::size_t j = i + 1; j < recs.size(); ++j) {
            if (used[j] || recs[j].user == recs[i].user || recs[j].duration != recs[i].duration) continue;
            auto dt = recs[j].instant() - recs[i].instant();
            if (dt < 0 || dt > tol) continue;
            used[i] = used[j] = 1;
            out[make_pair_key(recs[i].user, recs[j].user)].push_back({recs[i].instant().seconds(), recs[i].duration});
            break;
        }
    }
    for (auto& [_, v] : out) std::sort(v.begin(), v.end());
    return out;
}

void call_graph_oracle(const synth::GeneratedCity& city) {
    CdrDataset ds(city.records, city.config.window());
    auto graph = edges_of(reconstruct_call_graph(ds, 1));
    EdgeMultiset truth;
    for (const auto& p : city.paired) truth[make_pair_key(p.a, p.b)].push_back({p.instant.seconds(), p.duration});
    for (auto& [_, v] : truth) std::sort(v.begin(), v.end());
    bool full = graph == truth;

    std::vector<CdrRecord> slice(ds.records().begin(), ds.records().begin() + std::min<std::size_t>(2000, ds.size()));
    CdrDataset sds(slice, city.config.window());
    auto fast = edges_of(reconstruct_call_graph(sds, 1));
    auto slow = brute_force_matches(sds.records(), 1);
    std::size_t slice_calls = 0;
    for (const auto& [_, v] : slow) slice_calls += v.size();
    bool sliced = fast == slow && slice_calls > 0;
    report(4, "call graph", full && sliced,
           std::to_string(city.paired.size()) + " generated calls over " + std::to_string(truth.size()) +
               " pairs " + (full ? "recovered exactly" : "MISMATCH") + "; 2k slice " + std::to_string(slice_calls) +
               " matches " + (sliced ? "agree" : "DISAGREE") + " with brute force");
}

// ---------------------------------------------------------------------------

double exhaustive_shortest(const RouteGraph& g) {
    const int n = static_cast<int>(g.nodes.size());
    std::vector<std::vector<double>> w(n, std::vector<double>(n, -1.0));
    for (const auto& e : g.edges) {
        if (w[e.a][e.b] < 0 || e.km < w[e.a][e.b]) w[e.a][e.b] = w[e.b][e.a] = e.km;
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> on(n, 0);
    std::function<void(int, double)> walk = [&](int u, double len) {
        if (u == g.target) {
            best = std::min(best, len);
            return;
        }
        on[u] = 1;
        for (int v = 0; v < n; ++v)
            if (!on[v] && w[u][v] >= 0) walk(v, len + w[u][v]);
        on[u] = 0;
    };
    walk(g.source, 0.0);
    return best;
}

void dijkstra_oracle() {
    std::mt19937_64 rng(2024);
    int agree = 0;
    const int cases = 200;
    for (int c = 0; c < cases; ++c) {
        int n = 2 + static_cast<int>(rng() % 7);
        RouteGraph g;
        for (int i = 0; i < n; ++i) g.nodes.push_back({static_cast<double>(i), 0.0});
        std::uniform_real_distribution<double> km(0.1, 10.0);
        std::set<std::pair<int, int>> have;
        for (int i = 1; i < n; ++i) {
            int j = static_cast<int>(rng() % i);
            g.edges.push_back({j, i, km(rng)});
            have.insert({j, i});
        }
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (!have.count({a, b}) && rng() % 3 == 0) g.edges.push_back({a, b, km(rng)});
        g.source = static_cast<int>(rng() % n);
        do g.target = static_cast<int>(rng() % n);
        while (g.target == g.source);
        auto r = shortest_route(g);
        double path = 0.0;
        bool valid = r.nodes.front() == g.source && r.nodes.back() == g.target;
        for (std::size_t i = 1; i < r.nodes.size() && valid; ++i) {
            double leg = -1.0;
            for (const auto& e : g.edges)
                if ((e.a == r.nodes[i - 1] && e.b == r.nodes[i]) || (e.b == r.nodes[i - 1] && e.a == r.nodes[i]))
                    leg = leg < 0 ? e.km : std::min(leg, e.km);
            valid &= leg >= 0;
            path += leg;
        }
        double best = exhaustive_shortest(g);
        agree += valid && std::abs(r.km - best) <= 1e-9 * best && std::abs(path - r.km) <= 1e-9 * best;
    }
    report(5, "dijkstra", agree == cases, std::to_string(agree) + "/" + std::to_string(cases) + " graphs match exhaustive search");
}

// ---------------------------------------------------------------------------

void clustering_recovery() {
    const double sigma = 1.0;
    const std::array<ml::Vec<2>, 3> centers{{{0.0, 0.0}, {12.0, 0.0}, {6.0, 10.5}}};
    int xmeans_three = 0, em_close = 0, em_monotone = 0;
    const int seeds = 50;
    for (int s = 1; s <= seeds; ++s) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(s) * 7919);
        std::normal_distribution<double> n(0.0, sigma);
        std::vector<ml::WeightedPoint<2>> pts;
        for (const auto& c : centers)
            for (int i = 0; i < 100; ++i) pts.push_back({{c[0] + n(rng), c[1] + n(rng)}, 1.0});
        std::span<const ml::WeightedPoint<2>> view(pts);

        ml::XmeansOptions xo;
        xo.seed = static_cast<std::uint64_t>(s);
        xmeans_three += ml::xmeans_cluster(view, xo).k() == 3;

        ml::EmOptions eo;
        eo.k = 3;
        eo.seed = static_cast<std::uint64_t>(s);
        auto m = ml::em_cluster(view, eo);
        std::array<bool, 3> claimed{};
        bool close = m.k() == 3;
        for (const auto& c : m.clusters) {
            bool hit = false;
            for (std::size_t t = 0; t < 3 && !hit; ++t)
                if (!claimed[t] && std::hypot(c.centroid[0] - centers[t][0], c.centroid[1] - centers[t][1]) <= 2 * sigma)
                    claimed[t] = hit = true;
            close &= hit;
        }
        em_close += close;
        bool mono = m.trace.size() >= 2;
        for (std::size_t i = 1; i < m.trace.size(); ++i)
            mono &= m.trace[i] >= m.trace[i - 1] - 1e-12 * std::max(1.0, std::abs(m.trace[i - 1]));
        em_monotone += mono;
    }
    report(6, "clustering", xmeans_three >= 45 && em_close == seeds && em_monotone == seeds,
           "x-means k=3 in " + std::to_string(xmeans_three) + "/50; EM centroids within 2 sigma " +
               std::to_string(em_close) + "/50; EM log-likelihood monotone " + std::to_string(em_monotone) + "/50");
}

// ---------------------------------------------------------------------------

void voronoi_property() {
    std::mt19937_64 rng(77);
    BBox box{23.70, 90.33, 23.88, 90.4635};
    std::uniform_real_distribution<double> lat(box.min_lat, box.max_lat), lon(box.min_lon, box.max_lon);
    std::vector<GeoPoint> sites;
    for (int i = 0; i < 100; ++i) sites.push_back({lat(rng), lon(rng)});
    auto v = voronoi(sites, box);
    const auto& proj = v.projection();
    std::vector<PlanePoint> xy;
    for (const auto& s : v.sites()) xy.push_back(proj.forward(s));
    int ok = 0;
    const int queries = 10000;
    for (int q = 0; q < queries; ++q) {
        GeoPoint p{lat(rng), lon(rng)};
        auto cell = v.locate(p);
        auto pq = proj.forward(p);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : xy) best = std::min(best, std::hypot(s.x - pq.x, s.y - pq.y));
        if (cell) {
            double mine = std::hypot(xy[*cell].x - pq.x, xy[*cell].y - pq.y);
            ok += mine <= best + 1e-9;
        }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) sum += v.cell_area_km2(i);
    double rel = std::abs(sum - v.box_area_km2()) / v.box_area_km2();
    report(7, "voronoi", ok == queries && rel <= 1e-6 && v.size() == 100,
           std::to_string(ok) + "/" + std::to_string(queries) + " queries in the nearest site's cell; area error " +
               [&] { std::ostringstream s; s << rel; return s.str(); }());
}

// ---------------------------------------------------------------------------

void weekend_detection() {
    std::string got;
    bool ok = true;
    for (auto day : {Weekday::friday, Weekday::sunday}) {
        synth::CityConfig cc;
        cc.num_users = 200;
        cc.days = 28;
        cc.weekend_day = day;
        auto city = synth::generate_city(cc);
        std::string tag = "weekend_" + std::string(to_string(day));
        auto cdr = (scratch() / (tag + ".csv")).string();
        synth::write_city(city, cdr, (scratch() / (tag + "_truth.csv")).string());
        KnowledgeBase kb(scratch() / ("kb_" + tag));
        PipelineConfig cfg;
        cfg.input = cdr;
        run_ingest(kb, cfg);
        run_layer1(kb, cfg);
        auto detected = read_weekend(kb, 2);
        ok &= detected == day;
        got += (got.empty() ? "" : ", ") + std::string(to_string(day)) + " -> " + std::string(to_string(detected));
    }
    report(8, "weekend", ok, got);
}

// ---------------------------------------------------------------------------

UserLog random_log(std::mt19937_64& rng) {
    UserLog log;
    log.user = "u";
    Date d0 = *Date::from_ymd(2012, 6, 19);
    int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
        Instant t{d0 + static_cast<int>(rng() % 30), TimeOfDay{static_cast<std::int32_t>(rng() % 86400)}};
        log.entries.push_back({t, static_cast<std::int32_t>(rng() % 3600), {static_cast<double>(rng() % 4), 0.0}});
    }
    std::sort(log.entries.begin(), log.entries.end());
    return log;
}

void invariants(const fs::path& determinism_input) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int cases = 1000;
    std::vector<std::string> parts;
    bool all = true;

    // Additivity over complementary windows and monotonicity under added calls.
    int additive = 0;
    for (int c = 0; c < cases; ++c) {
        auto log = random_log(rng);
        UsageScoreParams p{0.1 + u(rng) * 5, 0.1 + u(rng) * 5, 60.0};
        int a = static_cast<int>(rng() % 24), b = (a + 1 + static_cast<int>(rng() % 23)) % 24;
        auto w = TimeWindow::hours(WindowLabel::custom, a, b);
        auto rest = TimeWindow::hours(WindowLabel::custom, b, a);
        double whole = usage_score(log, Period::all(), std::nullopt, p).score;
        double split = usage_score(log, Period::of(w), std::nullopt, p).score +
                       usage_score(log, Period::of(rest), std::nullopt, p).score;
        auto more = log;
        more.entries.push_back({log.entries.back().instant, static_cast<std::int32_t>(rng() % 100), {0, 0}});
        double bigger = usage_score(more, Period::all(), std::nullopt, p).score;
        additive += std::abs(whole - split) <= 1e-9 * std::max(1.0, whole) && bigger >= whole;
    }
    parts.push_back("additivity/monotonicity " + std::to_string(additive) + "/" + std::to_string(cases));
    all &= additive == cases;

    // Home/work argmax is unchanged when both weights are scaled together.
    int argmax = 0;
    for (int c = 0; c < cases; ++c) {
        int k = 1 + static_cast<int>(rng() % 5);
        UsageScoreParams p{0.1 + u(rng) * 3, 0.1 + u(rng) * 3, 60.0};
        double scale = 0.01 + u(rng) * 100;
        UsageScoreParams q{p.omega_c * scale, p.omega_d * scale, 60.0};
        std::vector<Poi> a, b;
        for (int i = 0; i < k; ++i) {
            GeoPoint loc{23.7 + 0.05 * i, 90.4};
            std::int64_t oc = rng() % 50, od = rng() % 5000, wc = rng() % 50, wd = rng() % 5000;
            for (auto [params, out] : {std::pair{&p, &a}, std::pair{&q, &b}}) {
                Poi poi;
                poi.centroid = loc;
                poi.mu_off = params->score(oc, od);
                poi.mu_work = params->score(wc, wd);
                poi.mu_total = params->score(oc + wc, od + wd);
                poi.members = {{loc, poi.mu_off, poi.mu_work, poi.mu_total, oc + wc}};
                out->push_back(poi);
            }
        }
        auto ha = infer_home_work(a), hb = infer_home_work(b);
        argmax += ha.home_poi == hb.home_poi && ha.work_poi == hb.work_poi;
    }
    parts.push_back("argmax rescaling " + std::to_string(argmax) + "/" + std::to_string(cases));
    all &= argmax == cases;

    // Closeness: symmetric in the pair, monotone in each component.
    int sym = 0, mono = 0;
    const auto off = Period::of(TimeWindow::hours(WindowLabel::off_hours, 19, 7));
    for (int c = 0; c < cases; ++c) {
        CallGraph g;
        const std::vector<std::string> users{"a", "b", "c", "d", "e"};
        Instant t0{*Date::from_ymd(2012, 6, 19), TimeOfDay{0}};
        int calls = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < calls; ++i) {
            auto x = users[rng() % 5], y = users[rng() % 5];
            if (x == y) continue;
            g.edges[make_pair_key(x, y)].push_back({t0 + static_cast<std::int64_t>(rng() % (30 * 86400)),
                                                    static_cast<std::int32_t>(rng() % 600)});
        }
        auto stats = edge_stats(g, off);
        auto strengths = call_strengths(stats);
        auto x = users[rng() % 5], y = users[rng() % 5];
        auto s1 = call_strength(stats, strengths, x, y), s2 = call_strength(stats, strengths, y, x);
        ClosenessComponents cc{s1.strength, u(rng) < 0.5, u(rng) < 0.5, static_cast<int>(rng() % 5), s1.off_hours_fraction};
        ClosenessComponents cd{s2.strength, cc.co_home, cc.co_work, cc.co_poi_count, s2.off_hours_fraction};
        sym += closeness(cc) == closeness(cd);
        double base = closeness(cc);
        bool m = true;
        auto up = cc;
        up.call_strength = std::min(1.0, up.call_strength + u(rng));
        m &= closeness(up) >= base;
        up = cc;
        up.off_hours_fraction = std::min(1.0, up.off_hours_fraction + u(rng));
        m &= closeness(up) >= base;
        up = cc;
        up.co_poi_count += 1;
        m &= closeness(up) >= base;
        up = cc;
        if (!up.co_home) {
            up.co_home = true;
            m &= closeness(up) >= base;
        }
        mono += m;
    }
    parts.push_back("closeness symmetry " + std::to_string(sym) + "/" + std::to_string(cases) + " monotone " +
                    std::to_string(mono) + "/" + std::to_string(cases));
    all &= sym == cases && mono == cases;

    // Every (layer, reader) pair of the knowledge base.
    {
        KnowledgeBase kb(scratch() / "kb_pairs");
        for (int l = raw_layer; l <= max_layer; ++l) kb.write(l, "probe", Table{{"x"}, {{"1"}}});
        int right = 0, pairs = 0;
        for (int layer = raw_layer; layer <= max_layer; ++layer)
            for (int reader = raw_layer; reader <= max_layer; ++reader) {
                ++pairs;
                bool allowed = true;
                try {
                    (void)kb.read(layer, "probe", reader);
                } catch (const HierarchyViolation&) {
                    allowed = false;
                }
                right += allowed == (layer < reader);
            }
        parts.push_back("hierarchy " + std::to_string(right) + "/" + std::to_string(pairs));
        all &= right == 36 && pairs == 36;
    }

    // Two full runs of the same input give identical knowledge bases.
    {
        PipelineConfig cfg;
        cfg.input = determinism_input.string();
        KnowledgeBase a(scratch() / "kb_det_a"), b(scratch() / "kb_det_b");
        run_all(a, cfg);
        run_all(b, cfg);
        bool same = a.digest() == b.digest();
        parts.push_back(std::string("determinism ") + (same ? "digests equal" : "DIGESTS DIFFER"));
        all &= same;
    }

    std::string detail;
    for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
    report(9, "invariants", all, detail);
}

// ---------------------------------------------------------------------------

void class_shares(const fs::path& kb_dir) {
    KnowledgeBase kb(kb_dir);
    auto t = kb.read(1, "activity_class", consumer_layer);
    auto col = t.column("class");
    std::map<std::string, int> n;
    for (const auto& row : t.rows) n[row[col]]++;
    double total = static_cast<double>(t.size());
    double lo = 100.0 * n["MINIMAL"] / total, mid = 100.0 * n["REGULAR"] / total, hi = 100.0 * n["HEAVY"] / total;
    bool ok = std::abs(lo - 36) <= 1 && std::abs(mid - 58) <= 1 && std::abs(hi - 6) <= 1;
    report(10, "class shares", ok, fmt(lo, 1) + "/" + fmt(mid, 1) + "/" + fmt(hi, 1) + " minimal/regular/heavy");
}

} // namespace

int main() {
    try {
        usage_reproduction();
        haversine_reproduction();
        auto clean = end_to_end(0.0, "clean");
        auto noisy = end_to_end(0.1, "noisy");
        accuracy(clean, noisy);
        call_graph_oracle(clean.city);
        dijkstra_oracle();
        clustering_recovery();
        voronoi_property();
        weekend_detection();
        invariants(scratch() / "noisy.csv");
        class_shares(clean.kb_dir);
    } catch (const std::exception& e) {
        std::cout << "FAIL  harness aborted: " << e.what() << std::endl;
        ++failures;
    }
    fs::remove_all(scratch());
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
    return failures ? 1 : 0;
}
