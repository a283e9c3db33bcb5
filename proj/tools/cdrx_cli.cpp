#include "cdrx/cdrx.hpp"

#include <CLI11.hpp>

#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
    std::string input;
    std::string kb = "kb";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string method;
    std::string truth;
};

cdrx::PipelineConfig load_config(const Flags& f) {
    cdrx::PipelineConfig cfg;
    if (!f.config.empty()) cdrx::apply_config_file(cfg, f.config);
    if (!f.input.empty()) cfg.input = f.input;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.method.empty()) cdrx::set_config(cfg, "method", f.method);
    cfg.kb = f.kb;
    cfg.validate();
    return cfg;
}

void print_receipts(const std::vector<cdrx::CommitReceipt>& rs) {
    for (const auto& r : rs)
        std::cout << "layer" << r.layer << "/" << r.table << "  rows=" << r.rows << "  sha256=" << r.digest.substr(0, 16) << "\n";
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw cdrx::DataError("cannot write '" + path + "'");
    out << text;
    if (!out.flush()) throw cdrx::DataError("short write to '" + path + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered social-feature analysis of call detail records"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags flags;
    app.add_option("--input", flags.input, "CDR csv: user_id,date,time,duration,lat,lon");
    app.add_option("--kb", flags.kb, "knowledge base directory")->capture_default_str();
    app.add_option("--config", flags.config, "key = value config file");
    app.add_option("--seed", flags.seed, "random seed");
    app.add_option("--method", flags.method, "POI clustering: em or xmeans");
    app.add_option("--truth", flags.truth, "truth csv (score) or truth output path (synth)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic city");
    cdrx::synth::CityConfig city;
    std::string synth_out = "cdr.csv";
    std::string weekend = "friday", start = "2012-06-19";
    synth->add_option("--out", synth_out, "CDR output path")->capture_default_str();
    synth->add_option("--users", city.num_users)->capture_default_str();
    synth->add_option("--days", city.days)->capture_default_str();
    synth->add_option("--towers", city.towers)->capture_default_str();
    synth->add_option("--noise", city.noise)->capture_default_str();
    synth->add_option("--activity-rate", city.activity_rate)->capture_default_str();
    synth->add_option("--weekend", weekend)->capture_default_str();
    synth->add_option("--start", start, "first day, YYYY-MM-DD")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "validate the input into layer 0");
    std::array<CLI::App*, 5> layers{};
    for (int l = 1; l <= 5; ++l)
        layers[l - 1] = app.add_subcommand("layer" + std::to_string(l), "run layer " + std::to_string(l));
    auto* run_all = app.add_subcommand("run-all", "ingest and run layers 1 to 5");
    auto* report = app.add_subcommand("report", "print summary tables");
    std::string out_path;
    report->add_option("--out", out_path, "output file, stdout by default");
    auto* geo = app.add_subcommand("export-geojson", "export zones, routes or voronoi cells");
    std::string what, window = "MIDDAY";
    geo->add_option("what", what, "zones | routes | voronoi")->required();
    geo->add_option("--window", window, "day slot for busy_class")->capture_default_str();
    geo->add_option("--out", out_path, "output file, stdout by default");
    auto* score = app.add_subcommand("score", "compare the knowledge base with a truth file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(cdrx::ExitCode::config_error);
    }

    try {
        if (synth->parsed()) {
            if (flags.seed) city.seed = *flags.seed;
            auto wd = cdrx::parse_weekday(weekend);
            auto d = cdrx::Date::parse(start);
            if (!wd) throw cdrx::ConfigError("--weekend: unknown weekday '" + weekend + "'");
            if (!d) throw cdrx::ConfigError("--start: expected YYYY-MM-DD");
            city.weekend_day = *wd;
            city.start = *d;
            auto generated = cdrx::synth::generate_city(city);
            std::string truth_out = flags.truth.empty() ? "truth.csv" : flags.truth;
            cdrx::synth::write_city(generated, synth_out, truth_out);
            std::cout << "wrote " << generated.records.size() << " records for " << generated.personas.size()
                      << " users to " << synth_out << ", truth to " << truth_out << "\n";
            return 0;
        }

        auto cfg = load_config(flags);
        cdrx::KnowledgeBase kb(cfg.kb);

        if (report->parsed()) {
            write_output(out_path, cdrx::render_report(kb));
            return 0;
        }
        if (geo->parsed()) {
            auto kind = cdrx::parse_export_kind(what);
            if (!kind) throw cdrx::ConfigError("export-geojson: expected zones, routes or voronoi, got '" + what + "'");
            write_output(out_path, cdrx::export_geojson(kb, *kind, window).dump() + "\n");
            return 0;
        }
        if (score->parsed()) {
            if (flags.truth.empty()) throw cdrx::ConfigError("score needs --truth");
            auto truth = cdrx::synth::read_truth_file(flags.truth);
            std::cout << cdrx::render_scores(cdrx::score_against_truth(kb, truth));
            return 0;
        }

        cdrx::KbLock lock(kb.root());
        if (ingest->parsed()) print_receipts(cdrx::run_ingest(kb, cfg));
        for (int l = 1; l <= 5; ++l)
            if (layers[l - 1]->parsed()) print_receipts(cdrx::run_layer(kb, cfg, l));
        if (run_all->parsed()) print_receipts(cdrx::run_all(kb, cfg));
        return 0;
    } catch (const cdrx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(cdrx::ExitCode::data_error);
    }
}
