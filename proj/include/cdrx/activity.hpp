#pragma once

#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/ingest.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cdrx {

// ---------------------------------------------------------------------------
// Usage score.

/// μ = omega_c * calls + omega_d * (duration / duration_unit).
/// The defaults weigh one call like one minute of talk time.
struct UsageScoreParams {
    double omega_c = 1.0;
    double omega_d = 1.0;
    double duration_unit = 60.0; // seconds

    void validate() const {
        if (!(omega_c >= 0.0) || !(omega_d >= 0.0) || !std::isfinite(omega_c) || !std::isfinite(omega_d))
            throw ConfigError("usage score weights must be finite and non-negative");
        if (omega_c == 0.0 && omega_d == 0.0) throw ConfigError("usage score weights must not both be zero");
        if (!(duration_unit > 0.0)) throw ConfigError("usage score duration unit must be positive");
    }

    double score(std::int64_t calls, std::int64_t duration) const {
        return omega_c * static_cast<double>(calls) +
               omega_d * (static_cast<double>(duration) / duration_unit);
    }
};

struct UsageScore {
    std::string user;
    Period window;
    std::optional<GeoPoint> loc_filter;
    double score = 0.0;
    std::int64_t num_calls = 0;
    std::int64_t total_duration = 0;
};

inline UsageScore usage_score(const UserLog& log, const Period& window, const std::optional<GeoPoint>& loc_filter,
                              const UsageScoreParams& params) {
    params.validate();
    UsageScore s{log.user, window, loc_filter};
    for (const auto& e : log.entries) {
        if (loc_filter && e.loc != *loc_filter) continue;
        if (!window.contains(e.instant)) continue;
        s.num_calls += 1;
        s.total_duration += e.duration;
    }
    s.score = params.score(s.num_calls, s.total_duration);
    return s;
}

/// Rounds halves away from zero for non-negative scores (79.5 -> 80).
inline std::int64_t round_half_up(double v) { return static_cast<std::int64_t>(std::floor(v + 0.5)); }

// ---------------------------------------------------------------------------
// Activity classes.

enum class ActivityClass : std::uint8_t { minimal, regular, heavy };

inline std::string_view to_string(ActivityClass c) {
    static constexpr std::array<std::string_view, 3> names{"MINIMAL", "REGULAR", "HEAVY"};
    return names[static_cast<int>(c)];
}

struct UserActivity {
    std::string user;
    ActivityClass cls = ActivityClass::minimal;
    bool operator==(const UserActivity&) const = default;
};

inline ActivityClass classify_score(double mu, double t_low, double t_high) {
    if (mu < t_low) return ActivityClass::minimal;
    if (mu > t_high) return ActivityClass::heavy;
    return ActivityClass::regular;
}

/// μ < t_low is MINIMAL, μ > t_high is HEAVY, everything else REGULAR.
/// `t_low == t_high` is accepted (a one-point REGULAR band).
inline std::vector<UserActivity> classify_activity(const std::vector<std::pair<std::string, double>>& scores,
                                                   double t_low, double t_high) {
    if (!(t_low <= t_high)) throw ConfigError("activity thresholds need t_low <= t_high");
    std::vector<UserActivity> out;
    out.reserve(scores.size());
    for (const auto& [user, mu] : scores) out.push_back({user, classify_score(mu, t_low, t_high)});
    return out;
}

/// Thresholds such that, for distinct values, exactly floor(q_low*n) values
/// fall below t_low and n - ceil(q_high*n) fall above t_high.
inline std::pair<double, double> quantile_thresholds(std::vector<double> values, double q_low, double q_high) {
    if (!(q_low >= 0.0 && q_low <= q_high && q_high <= 1.0)) throw ConfigError("activity quantiles need 0 <= q_low <= q_high <= 1");
    if (values.empty()) throw DataError("cannot derive activity thresholds from zero users");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto clamp = [&](double i) {
        return static_cast<std::size_t>(std::clamp(i, 0.0, n - 1.0));
    };
    std::size_t lo = clamp(std::floor(q_low * n));
    std::size_t hi = clamp(std::ceil(q_high * n) - 1.0);
    return {values[lo], values[std::max(lo, hi)]};
}

// ---------------------------------------------------------------------------
// Temporal histogram.

struct SlotCount {
    std::int64_t calls = 0;
    std::int64_t active_users = 0;
    bool operator==(const SlotCount&) const = default;
};

struct TemporalHistogram {
    std::vector<TimeWindow> slots;
    std::vector<SlotCount> totals;                         // per slot, whole window
    std::map<Date, std::vector<SlotCount>> per_day;         // per date, per slot
};

/// Throws ConfigError unless every second of the day lies in exactly one slot.
inline void check_partition(std::span<const TimeWindow> slots) {
    if (slots.empty()) throw ConfigError("histogram needs at least one slot");
    std::set<std::int32_t> marks;
    for (const auto& w : slots) {
        marks.insert(w.start().seconds());
        marks.insert(w.end().seconds());
    }
    // Coverage is constant between consecutive boundaries, so probing each
    // boundary covers every elementary interval.
    for (auto s : marks) {
        int hits = 0;
        for (const auto& w : slots) hits += w.contains(TimeOfDay{s});
        if (hits > 1) throw ConfigError("histogram slots overlap at " + TimeOfDay{s}.str());
        if (hits == 0) throw ConfigError("histogram slots leave " + TimeOfDay{s}.str() + " uncovered");
    }
}

inline std::size_t slot_of(std::span<const TimeWindow> slots, TimeOfDay t) {
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (slots[i].contains(t)) return i;
    throw ConfigError("time " + t.str() + " falls in no slot");
}

inline TemporalHistogram temporal_histogram(const CdrDataset& ds, std::span<const TimeWindow> slots) {
    check_partition(slots);
    TemporalHistogram h;
    h.slots.assign(slots.begin(), slots.end());
    h.totals.assign(slots.size(), {});
    std::vector<std::set<std::string_view>> users(slots.size());
    std::map<Date, std::vector<std::set<std::string_view>>> day_users;
    for (const auto& r : ds.records()) {
        std::size_t s = slot_of(slots, r.time);
        h.totals[s].calls += 1;
        users[s].insert(r.user);
        auto& day = h.per_day[r.date];
        if (day.empty()) day.assign(slots.size(), {});
        day[s].calls += 1;
        auto& du = day_users[r.date];
        if (du.empty()) du.resize(slots.size());
        du[s].insert(r.user);
    }
    for (std::size_t s = 0; s < slots.size(); ++s) h.totals[s].active_users = static_cast<std::int64_t>(users[s].size());
    for (auto& [date, counts] : h.per_day)
        for (std::size_t s = 0; s < slots.size(); ++s)
            counts[s].active_users = static_cast<std::int64_t>(day_users[date][s].size());
    return h;
}

// ---------------------------------------------------------------------------
// Weekend detection.

/// Aggregate μ for every date of the observation window (zero-call days
/// included).
inline std::vector<std::pair<Date, double>> daily_usage(const CdrDataset& ds, const UsageScoreParams& params) {
    params.validate();
    Date first = ds.window().start.date(), last = ds.window().end.date();
    std::vector<std::int64_t> calls(static_cast<std::size_t>(last - first + 1), 0), dur(calls.size(), 0);
    for (const auto& r : ds.records()) {
        auto i = static_cast<std::size_t>(r.date - first);
        calls[i] += 1;
        dur[i] += r.duration;
    }
    std::vector<std::pair<Date, double>> out;
    out.reserve(calls.size());
    for (std::size_t i = 0; i < calls.size(); ++i)
        out.push_back({first + static_cast<int>(i), params.score(calls[i], dur[i])});
    return out;
}

struct WeekendDetection {
    Weekday day = Weekday::sunday;
    bool ambiguous = false;
    std::vector<Weekday> candidates; // every weekday tied at the minimum
    std::array<double, 7> mean_usage{};
};

/// The weekday with the lowest mean daily μ. Means within a relative 1e-9
/// of the minimum count as tied; a tie is flagged ambiguous and `day` is
/// the first tied weekday from Sunday.
inline WeekendDetection detect_weekend(const std::vector<std::pair<Date, double>>& daily) {
    if (daily.size() < 14) throw DataError("weekend detection needs at least 14 days, got " + std::to_string(daily.size()));
    std::vector<std::pair<Date, double>> sorted = daily;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].first - sorted[i - 1].first != 1) throw DataError("weekend detection needs consecutive days");
    std::array<double, 7> sum{};
    std::array<int, 7> n{};
    for (const auto& [d, mu] : sorted) {
        auto w = static_cast<int>(d.weekday());
        sum[w] += mu;
        n[w] += 1;
    }
    WeekendDetection out;
    for (int w = 0; w < 7; ++w) out.mean_usage[w] = sum[w] / n[w];
    double lo = *std::min_element(out.mean_usage.begin(), out.mean_usage.end());
    double slack = 1e-9 * std::max(1.0, std::abs(lo));
    for (int w = 0; w < 7; ++w)
        if (out.mean_usage[w] - lo <= slack) out.candidates.push_back(static_cast<Weekday>(w));
    out.day = out.candidates.front();
    out.ambiguous = out.candidates.size() > 1;
    return out;
}

// ---------------------------------------------------------------------------
// Calling-relationship graph.

struct MatchedCall {
    Instant instant; // the earlier of the two start times
    std::int32_t duration = 0;
    auto operator<=>(const MatchedCall&) const = default;
};

using UserPair = std::pair<std::string, std::string>;

inline UserPair make_pair_key(std::string_view a, std::string_view b) {
    return a < b ? UserPair{std::string(a), std::string(b)} : UserPair{std::string(b), std::string(a)};
}

/// Undirected user graph; an edge's weight is the number of matched calls.
struct CallGraph {
    std::vector<std::string> nodes;
    std::map<UserPair, std::vector<MatchedCall>> edges;

    std::size_t weight(std::string_view a, std::string_view b) const {
        auto it = edges.find(make_pair_key(a, b));
        return it == edges.end() ? 0 : it->second.size();
    }
    std::size_t total_weight() const {
        std::size_t s = 0;
        for (const auto& [_, calls] : edges) s += calls.size();
        return s;
    }
};

/// Pairs records of distinct users whose durations are equal and whose start
/// times differ by at most `time_tolerance` seconds. Records are visited in
/// canonical order and each takes the first still-unmatched partner after
/// it, so a record joins at most one match.
inline CallGraph reconstruct_call_graph(const CdrDataset& ds, std::int64_t time_tolerance = 1) {
    if (time_tolerance < 0) throw ConfigError("call matching tolerance must be >= 0");
    const auto& recs = ds.records();
    CallGraph g;
    {
        std::set<std::string_view> users;
        for (const auto& r : recs) users.insert(r.user);
        g.nodes.assign(users.begin(), users.end());
    }
    std::unordered_map<std::int32_t, std::vector<std::size_t>> by_duration;
    std::vector<std::size_t> pos(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto& bucket = by_duration[recs[i].duration];
        pos[i] = bucket.size();
        bucket.push_back(i);
    }
    std::vector<char> used(recs.size(), 0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (used[i]) continue;
        const auto& bucket = by_duration[recs[i].duration];
        Instant ti = recs[i].instant();
        for (std::size_t p = pos[i] + 1; p < bucket.size(); ++p) {
            std::size_t j = bucket[p];
            if (recs[j].instant() - ti > time_tolerance) break;
            if (used[j] || recs[j].user == recs[i].user) continue;
            used[i] = used[j] = 1;
            g.edges[make_pair_key(recs[i].user, recs[j].user)].push_back({ti, recs[i].duration});
            break;
        }
    }
    for (auto& [_, calls] : g.edges) std::sort(calls.begin(), calls.end());
    return g;
}

} // namespace cdrx
