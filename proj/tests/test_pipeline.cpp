#include "cdrx/cdrx.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace cdrx;
namespace fs = std::filesystem;

namespace {

struct City {
    fs::path dir;
    std::string cdr;
    std::vector<synth::Persona> truth;

    City() {
        dir = fs::temp_directory_path() / ("cdrx_pipe_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        synth::CityConfig c;
        c.num_users = 120;
        c.days = 21;
        c.towers = 400;
        auto city = synth::generate_city(c);
        cdr = (dir / "cdr.csv").string();
        synth::write_city(city, cdr, (dir / "truth.csv").string());
        truth = city.personas;
    }
    ~City() { fs::remove_all(dir); }

    PipelineConfig config() const {
        PipelineConfig cfg;
        cfg.input = cdr;
        return cfg;
    }
};

City& city() {
    static City c;
    return c;
}

} // namespace

TEST(Config, KeysRoundTrip) {
    PipelineConfig cfg;
    apply_config_text(cfg, "# comment\nworking_hours = 08:00-16:00\nomega_d = 0.5\n\nmethod = xmeans\nseed=9\n");
    EXPECT_EQ(cfg.working_hours.span_str(), "08:00-16:00");
    EXPECT_EQ(cfg.usage.omega_d, 0.5);
    EXPECT_EQ(cfg.places.method, ClusterMethod::xmeans);
    EXPECT_EQ(cfg.seed, 9u);
    PipelineConfig copy;
    for (const auto& row : config_table(cfg).rows) set_config(copy, row[0], row[1]);
    EXPECT_EQ(config_table(copy), config_table(cfg));
}

TEST(Config, Errors) {
    PipelineConfig cfg;
    EXPECT_THROW(set_config(cfg, "no_such_key", "1"), ConfigError);
    EXPECT_THROW(set_config(cfg, "seed", "abc"), ConfigError);
    EXPECT_THROW(set_config(cfg, "method", "kmeans"), ConfigError);
    EXPECT_THROW(apply_config_text(cfg, "just words\n"), ConfigError);
    EXPECT_THROW(apply_config_file(cfg, "/nonexistent.conf"), ConfigError);
    cfg.activity_q_low = 0.9;
    cfg.activity_q_high = 0.1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Pipeline, LayerNeedsItsInputs) {
    auto kb_dir = city().dir / "kb_missing";
    KnowledgeBase kb(kb_dir);
    auto cfg = city().config();
    EXPECT_THROW(run_layer(kb, cfg, 3), DependencyError);
    PipelineConfig none;
    EXPECT_THROW(run_ingest(kb, none), ConfigError);
    EXPECT_THROW(run_layer(kb, cfg, 7), ConfigError);
    run_ingest(kb, cfg);
    EXPECT_THROW(run_layer(kb, cfg, 2), DependencyError);
}

TEST(Pipeline, FullRunProducesTables) {
    auto kb_dir = city().dir / "kb_full";
    KnowledgeBase kb(kb_dir);
    auto receipts = run_all(kb, city().config());
    EXPECT_FALSE(receipts.empty());
    for (auto [layer, name] : std::vector<std::pair<int, std::string>>{
             {0, "cdr"}, {0, "rejections"}, {0, "window"}, {1, "usage_scores"}, {1, "activity_class"},
             {1, "weekend"}, {1, "call_graph"}, {1, "temporal_histogram"}, {2, "user_places"}, {2, "user_pois"},
             {2, "zone_busyness"}, {3, "worker_class"}, {3, "routes"}, {3, "zone_type"}, {4, "groups"},
             {4, "transport"}, {4, "working_days"}, {5, "closeness"}, {5, "family_friends"}, {5, "profiles"}})
        EXPECT_TRUE(kb.contains(layer, name)) << layer << "/" << name;
    for (int l = 0; l <= max_layer; ++l) EXPECT_TRUE(kb.contains(l, "run_config")) << l;

    auto weekend = kb.read(1, "weekend", consumer_layer);
    auto sel = weekend.column("selected");
    for (const auto& row : weekend.rows)
        if (row[sel] == "1") {
            EXPECT_EQ(row[weekend.column("weekday")], "Friday");
        }

    auto places = kb.read(2, "user_places", consumer_layer);
    EXPECT_EQ(places.size(), city().truth.size());

    auto rep = score_against_truth(kb, city().truth);
    EXPECT_GE(rep.home.percent(), 95.0);
    EXPECT_GE(rep.workplace.percent(), 90.0);

    EXPECT_NE(render_report(kb).find("Activity classes"), std::string::npos);
    auto zones = export_geojson(kb, ExportKind::zones);
    EXPECT_EQ(zones["type"], "FeatureCollection");
    EXPECT_FALSE(zones["features"].empty());
    auto routes = export_geojson(kb, ExportKind::routes);
    for (const auto& f : routes["features"]) EXPECT_EQ(f["geometry"]["type"], "LineString");
    EXPECT_THROW(export_geojson(kb, ExportKind::zones, "TEATIME"), ConfigError);
}

TEST(Pipeline, RerunIsDeterministic) {
    KnowledgeBase a(city().dir / "kb_a"), b(city().dir / "kb_b");
    run_all(a, city().config());
    run_all(b, city().config());
    EXPECT_EQ(a.digest(), b.digest());
    auto first = a.digest();
    run_layer(a, city().config(), 3);
    EXPECT_EQ(a.digest(), first);
}

TEST(Pipeline, ExplicitThresholdsOverrideQuantiles) {
    KnowledgeBase kb(city().dir / "kb_thr");
    auto cfg = city().config();
    cfg.activity_t_low = 1e9;
    cfg.activity_t_high = 2e9;
    run_layer(kb, cfg, 0);
    run_layer(kb, cfg, 1);
    auto t = kb.read(1, "activity_class", 2);
    for (const auto& row : t.rows) EXPECT_EQ(row[t.column("class")], "MINIMAL");
}
