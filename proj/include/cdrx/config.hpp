#pragma once

#include "cdrx/activity.hpp"
#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/ml.hpp"
#include "cdrx/places.hpp"
#include "cdrx/social.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cdrx {

/// Every tunable of a pipeline run. Defaults are listed in `config_keys()`
/// and in the README.
struct PipelineConfig {
    std::string input;
    std::string kb = "kb";
    std::uint64_t seed = 1;

    // ingest
    std::optional<Date> window_start; // none: first date in the input
    std::optional<Date> window_end;   // none: last date in the input
    bool dedup = false;

    // time
    TimeWindow working_hours = TimeWindow::hours(WindowLabel::working_hours, 9, 17);
    TimeWindow off_hours = TimeWindow::hours(WindowLabel::off_hours, 19, 7);
    TimeWindow late_night = TimeWindow::hours(WindowLabel::late_night, 0, 4);
    std::optional<Weekday> weekend; // none: detect from daily usage

    // layer 1
    UsageScoreParams usage;
    double activity_q_low = 0.36;
    double activity_q_high = 0.94;
    std::optional<double> activity_t_low; // absolute thresholds override the quantiles
    std::optional<double> activity_t_high;
    std::int64_t match_tolerance_s = 1;

    // layer 2
    PlaceOptions places;

    // layer 3
    double regularity_threshold = 0.5;
    double presence_radius_km = 1.0;
    int route_k = 1;
    double commute_max_gap_h = 3.0;
    ml::LinearTrainOptions svm;

    // layer 4
    double neighbor_radius_km = 0.3;
    double colleague_radius_km = 0.3;
    SpecialGroupOptions special;
    TransportThresholds transport;
    double homemaker_home_share = 0.5;
    std::string gazetteer;

    // layer 5
    ClosenessFactors closeness;
    FamilyFriendOptions family_friends;

    PlaceOptions place_options() const {
        PlaceOptions p = places;
        p.seed = seed;
        return p;
    }

    ml::LinearTrainOptions train_options() const {
        auto t = svm;
        t.seed = seed;
        return t;
    }

    void validate() const {
        usage.validate();
        if (!(activity_q_low >= 0.0 && activity_q_low <= activity_q_high && activity_q_high <= 1.0))
            throw ConfigError("activity quantiles need 0 <= activity_q_low <= activity_q_high <= 1");
        if (activity_t_low.has_value() != activity_t_high.has_value())
            throw ConfigError("activity_t_low and activity_t_high must be set together");
        if (activity_t_low && !(*activity_t_low <= *activity_t_high))
            throw ConfigError("activity thresholds need activity_t_low <= activity_t_high");
        if (match_tolerance_s < 0) throw ConfigError("match_tolerance_s must be >= 0");
        if (window_start && window_end && *window_end < *window_start)
            throw ConfigError("window_end precedes window_start");
        if (!(places.min_weight_fraction >= 0.0 && places.min_weight_fraction <= 1.0))
            throw ConfigError("min_poi_weight must lie in [0, 1]");
        if (places.em_k_max < 1 || places.xmeans_k_max < 1) throw ConfigError("cluster count limits must be >= 1");
        if (!(places.merge_radius_km >= 0.0)) throw ConfigError("merge_radius_km must be >= 0");
        if (route_k < 1) throw ConfigError("route_k must be >= 1");
        if (!(commute_max_gap_h > 0.0)) throw ConfigError("commute_max_gap_h must be positive");
        if (svm.epochs < 1 || !(svm.learning_rate > 0.0) || !(svm.regularization >= 0.0))
            throw ConfigError("svm options need epochs >= 1, learning_rate > 0, regularization >= 0");
        if (!(neighbor_radius_km >= 0.0) || !(colleague_radius_km >= 0.0) || !(presence_radius_km >= 0.0))
            throw ConfigError("radii must be >= 0");
        if (!(transport.walking_below_kmh <= transport.motorized_above_kmh))
            throw ConfigError("walking_below_kmh must not exceed motorized_above_kmh");
    }
};

namespace detail {

inline double config_double(std::string_view key, std::string_view v) {
    auto d = parse_double(v);
    if (!d) throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
    return *d;
}

template <class Int>
Int config_int(std::string_view key, std::string_view v) {
    Int out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not an integer");
    return out;
}

inline bool config_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected true or false");
}

inline TimeWindow config_window(std::string_view key, WindowLabel label, std::string_view v) {
    auto w = TimeWindow::parse_span(label, v);
    if (!w) throw ConfigError("config key '" + std::string(key) + "': expected HH:MM-HH:MM, got '" + std::string(v) + "'");
    return *w;
}

inline std::optional<Date> config_date(std::string_view key, std::string_view v) {
    if (v.empty() || v == "auto") return std::nullopt;
    auto d = Date::parse(v);
    if (!d) throw ConfigError("config key '" + std::string(key) + "': expected YYYY-MM-DD");
    return d;
}

inline std::string num(double v) { return format_exact(v); }

} // namespace detail

struct ConfigKey {
    std::string_view key;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, std::string_view)> set;
};

/// All recognised keys, in serialization order.
inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
    using C = PipelineConfig;
    static const std::vector<ConfigKey> keys{
        {"input", [](const C& c) { return c.input; }, [](C& c, std::string_view v) { c.input = v; }},
        {"seed", [](const C& c) { return std::to_string(c.seed); },
         [](C& c, std::string_view v) { c.seed = config_int<std::uint64_t>("seed", v); }},
        {"window_start", [](const C& c) { return c.window_start ? c.window_start->str() : "auto"; },
         [](C& c, std::string_view v) { c.window_start = config_date("window_start", v); }},
        {"window_end", [](const C& c) { return c.window_end ? c.window_end->str() : "auto"; },
         [](C& c, std::string_view v) { c.window_end = config_date("window_end", v); }},
        {"dedup", [](const C& c) { return std::string(c.dedup ? "true" : "false"); },
         [](C& c, std::string_view v) { c.dedup = config_bool("dedup", v); }},
        {"working_hours", [](const C& c) { return c.working_hours.span_str(); },
         [](C& c, std::string_view v) { c.working_hours = config_window("working_hours", WindowLabel::working_hours, v); }},
        {"off_hours", [](const C& c) { return c.off_hours.span_str(); },
         [](C& c, std::string_view v) { c.off_hours = config_window("off_hours", WindowLabel::off_hours, v); }},
        {"late_night", [](const C& c) { return c.late_night.span_str(); },
         [](C& c, std::string_view v) { c.late_night = config_window("late_night", WindowLabel::late_night, v); }},
        {"weekend", [](const C& c) { return c.weekend ? std::string(to_string(*c.weekend)) : "auto"; },
         [](C& c, std::string_view v) {
             if (v == "auto") {
                 c.weekend.reset();
                 return;
             }
             auto d = parse_weekday(v);
             if (!d) throw ConfigError("config key 'weekend': expected a weekday name or auto");
             c.weekend = *d;
         }},
        {"omega_c", [](const C& c) { return num(c.usage.omega_c); },
         [](C& c, std::string_view v) { c.usage.omega_c = config_double("omega_c", v); }},
        {"omega_d", [](const C& c) { return num(c.usage.omega_d); },
         [](C& c, std::string_view v) { c.usage.omega_d = config_double("omega_d", v); }},
        {"duration_unit_s", [](const C& c) { return num(c.usage.duration_unit); },
         [](C& c, std::string_view v) { c.usage.duration_unit = config_double("duration_unit_s", v); }},
        {"activity_q_low", [](const C& c) { return num(c.activity_q_low); },
         [](C& c, std::string_view v) { c.activity_q_low = config_double("activity_q_low", v); }},
        {"activity_q_high", [](const C& c) { return num(c.activity_q_high); },
         [](C& c, std::string_view v) { c.activity_q_high = config_double("activity_q_high", v); }},
        {"activity_t_low", [](const C& c) { return c.activity_t_low ? num(*c.activity_t_low) : "auto"; },
         [](C& c, std::string_view v) {
             if (v == "auto") c.activity_t_low.reset();
             else c.activity_t_low = config_double("activity_t_low", v);
         }},
        {"activity_t_high", [](const C& c) { return c.activity_t_high ? num(*c.activity_t_high) : "auto"; },
         [](C& c, std::string_view v) {
             if (v == "auto") c.activity_t_high.reset();
             else c.activity_t_high = config_double("activity_t_high", v);
         }},
        {"match_tolerance_s", [](const C& c) { return std::to_string(c.match_tolerance_s); },
         [](C& c, std::string_view v) { c.match_tolerance_s = config_int<std::int64_t>("match_tolerance_s", v); }},
        {"method", [](const C& c) { return std::string(to_string(c.places.method)); },
         [](C& c, std::string_view v) {
             auto m = parse_cluster_method(v);
             if (!m) throw ConfigError("config key 'method': expected em or xmeans");
             c.places.method = *m;
         }},
        {"min_poi_weight", [](const C& c) { return num(c.places.min_weight_fraction); },
         [](C& c, std::string_view v) { c.places.min_weight_fraction = config_double("min_poi_weight", v); }},
        {"merge_radius_km", [](const C& c) { return num(c.places.merge_radius_km); },
         [](C& c, std::string_view v) { c.places.merge_radius_km = config_double("merge_radius_km", v); }},
        {"em_k_max", [](const C& c) { return std::to_string(c.places.em_k_max); },
         [](C& c, std::string_view v) { c.places.em_k_max = config_int<std::size_t>("em_k_max", v); }},
        {"xmeans_k_max", [](const C& c) { return std::to_string(c.places.xmeans_k_max); },
         [](C& c, std::string_view v) { c.places.xmeans_k_max = config_int<std::size_t>("xmeans_k_max", v); }},
        {"regularity_threshold", [](const C& c) { return num(c.regularity_threshold); },
         [](C& c, std::string_view v) { c.regularity_threshold = config_double("regularity_threshold", v); }},
        {"presence_radius_km", [](const C& c) { return num(c.presence_radius_km); },
         [](C& c, std::string_view v) { c.presence_radius_km = config_double("presence_radius_km", v); }},
        {"route_k", [](const C& c) { return std::to_string(c.route_k); },
         [](C& c, std::string_view v) { c.route_k = config_int<int>("route_k", v); }},
        {"commute_max_gap_h", [](const C& c) { return num(c.commute_max_gap_h); },
         [](C& c, std::string_view v) { c.commute_max_gap_h = config_double("commute_max_gap_h", v); }},
        {"svm_epochs", [](const C& c) { return std::to_string(c.svm.epochs); },
         [](C& c, std::string_view v) { c.svm.epochs = config_int<int>("svm_epochs", v); }},
        {"svm_learning_rate", [](const C& c) { return num(c.svm.learning_rate); },
         [](C& c, std::string_view v) { c.svm.learning_rate = config_double("svm_learning_rate", v); }},
        {"svm_regularization", [](const C& c) { return num(c.svm.regularization); },
         [](C& c, std::string_view v) { c.svm.regularization = config_double("svm_regularization", v); }},
        {"neighbor_radius_km", [](const C& c) { return num(c.neighbor_radius_km); },
         [](C& c, std::string_view v) { c.neighbor_radius_km = config_double("neighbor_radius_km", v); }},
        {"colleague_radius_km", [](const C& c) { return num(c.colleague_radius_km); },
         [](C& c, std::string_view v) { c.colleague_radius_km = config_double("colleague_radius_km", v); }},
        {"late_night_fraction", [](const C& c) { return num(c.special.late_night_fraction); },
         [](C& c, std::string_view v) { c.special.late_night_fraction = config_double("late_night_fraction", v); }},
        {"professional_quantile", [](const C& c) { return num(c.special.professional_quantile); },
         [](C& c, std::string_view v) { c.special.professional_quantile = config_double("professional_quantile", v); }},
        {"traveler_quantile", [](const C& c) { return num(c.special.traveler_quantile); },
         [](C& c, std::string_view v) { c.special.traveler_quantile = config_double("traveler_quantile", v); }},
        {"traveler_min_towers", [](const C& c) { return num(c.special.traveler_min_towers); },
         [](C& c, std::string_view v) { c.special.traveler_min_towers = config_double("traveler_min_towers", v); }},
        {"walking_below_kmh", [](const C& c) { return num(c.transport.walking_below_kmh); },
         [](C& c, std::string_view v) { c.transport.walking_below_kmh = config_double("walking_below_kmh", v); }},
        {"motorized_above_kmh", [](const C& c) { return num(c.transport.motorized_above_kmh); },
         [](C& c, std::string_view v) { c.transport.motorized_above_kmh = config_double("motorized_above_kmh", v); }},
        {"homemaker_home_share", [](const C& c) { return num(c.homemaker_home_share); },
         [](C& c, std::string_view v) { c.homemaker_home_share = config_double("homemaker_home_share", v); }},
        {"gazetteer", [](const C& c) { return c.gazetteer; }, [](C& c, std::string_view v) { c.gazetteer = v; }},
        {"closeness_base_home", [](const C& c) { return num(c.closeness.base_home); },
         [](C& c, std::string_view v) { c.closeness.base_home = config_double("closeness_base_home", v); }},
        {"closeness_base_work", [](const C& c) { return num(c.closeness.base_work); },
         [](C& c, std::string_view v) { c.closeness.base_work = config_double("closeness_base_work", v); }},
        {"closeness_base_other", [](const C& c) { return num(c.closeness.base_other); },
         [](C& c, std::string_view v) { c.closeness.base_other = config_double("closeness_base_other", v); }},
        {"closeness_poi_step", [](const C& c) { return num(c.closeness.poi_step); },
         [](C& c, std::string_view v) { c.closeness.poi_step = config_double("closeness_poi_step", v); }},
        {"closeness_poi_cap", [](const C& c) { return std::to_string(c.closeness.poi_cap); },
         [](C& c, std::string_view v) { c.closeness.poi_cap = config_int<int>("closeness_poi_cap", v); }},
        {"closeness_off_floor", [](const C& c) { return num(c.closeness.off_floor); },
         [](C& c, std::string_view v) { c.closeness.off_floor = config_double("closeness_off_floor", v); }},
        {"tau_family", [](const C& c) { return num(c.family_friends.tau_family); },
         [](C& c, std::string_view v) { c.family_friends.tau_family = config_double("tau_family", v); }},
        {"tau_friend", [](const C& c) { return num(c.family_friends.tau_friend); },
         [](C& c, std::string_view v) { c.family_friends.tau_friend = config_double("tau_friend", v); }},
        {"tau_off", [](const C& c) { return num(c.family_friends.tau_off); },
         [](C& c, std::string_view v) { c.family_friends.tau_off = config_double("tau_off", v); }},
    };
    return keys;
}

inline void set_config(PipelineConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& k : config_keys())
        if (k.key == key) {
            k.set(cfg, value);
            return;
        }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
inline void apply_config_text(PipelineConfig& cfg, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (auto h = s.find('#'); h != std::string_view::npos) s = s.substr(0, h);
        s = trim(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        set_config(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
}

inline void apply_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

/// `key,value` rows for every config key. The knowledge-base root is where
/// the table lives, so it is not repeated.
inline Table config_table(const PipelineConfig& cfg) {
    Table t{{"key", "value"}};
    for (const auto& k : config_keys()) t.rows.push_back({std::string(k.key), k.get(cfg)});
    return t;
}

} // namespace cdrx
