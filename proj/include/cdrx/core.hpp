#pragma once

#include "cdrx/error.hpp"
#include "cdrx/time.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

namespace cdrx {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    constexpr auto operator<=>(const GeoPoint&) const = default;
};

inline constexpr std::int32_t max_call_duration = 86400;

/// One call event; the six-attribute feature vector of the raw log.
struct CdrRecord {
    std::string user;
    Date date;
    TimeOfDay time;
    std::int32_t duration = 0; // seconds
    double lat = 0.0;
    double lon = 0.0;

    Instant instant() const { return Instant{date, time}; }
    GeoPoint loc() const { return {lat, lon}; }

    bool operator==(const CdrRecord&) const = default;
};

/// Canonical record order: instant, then user, duration, lat, lon.
inline bool canonical_less(const CdrRecord& a, const CdrRecord& b) {
    auto ka = std::tuple{a.instant(), std::string_view{a.user}, a.duration, a.lat, a.lon};
    auto kb = std::tuple{b.instant(), std::string_view{b.user}, b.duration, b.lat, b.lon};
    return ka < kb;
}

/// Validated records in canonical order, the observation window and the
/// set of distinct tower locations.
class CdrDataset {
public:
    CdrDataset() = default;

    /// Sorts records canonically and derives the tower set. Records are
    /// assumed valid for `window`.
    CdrDataset(std::vector<CdrRecord> records, ObservationWindow window)
        : records_(std::move(records)), window_(window) {
        std::sort(records_.begin(), records_.end(), canonical_less);
        towers_.reserve(records_.size());
        for (const auto& r : records_) towers_.push_back(r.loc());
        std::sort(towers_.begin(), towers_.end());
        towers_.erase(std::unique(towers_.begin(), towers_.end()), towers_.end());
        towers_.shrink_to_fit();
    }

    const std::vector<CdrRecord>& records() const { return records_; }
    const ObservationWindow& window() const { return window_; }
    const std::vector<GeoPoint>& towers() const { return towers_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    bool operator==(const CdrDataset&) const = default;

private:
    std::vector<CdrRecord> records_;
    ObservationWindow window_{};
    std::vector<GeoPoint> towers_;
};

/// Result of record validation: empty means valid, otherwise the first
/// violated rule.
struct Validation {
    std::optional<std::string> rejection;
    bool valid() const { return !rejection.has_value(); }
    explicit operator bool() const { return valid(); }
};

inline Validation validate_record(const CdrRecord& r, const ObservationWindow& window) {
    if (r.user.empty()) return {"empty user id"};
    if (r.duration < 0 || r.duration > max_call_duration) return {"duration out of range"};
    if (!(r.lat >= -90.0 && r.lat <= 90.0)) return {"latitude out of range"};
    if (!(r.lon >= -180.0 && r.lon <= 180.0)) return {"longitude out of range"};
    if (r.time.seconds() < 0 || r.time.seconds() >= seconds_per_day) return {"invalid time"};
    if (!window.contains(r.instant())) return {"instant outside window"};
    return {};
}

// ---------------------------------------------------------------------------
// Text formatting shared by every table writer. std::to_chars output does not
// depend on locale, so table bytes are reproducible.

/// Shortest representation that parses back to the identical double.
inline std::string format_exact(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline std::string format_fixed(double v, int precision) {
    if (v == 0.0) v = 0.0; // drop negative zero
    std::array<char, 128> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, precision);
    if (ec != std::errc{}) return format_exact(v);
    return std::string(buf.data(), ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_integer(std::string_view s) {
    if (s.empty()) return std::nullopt;
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// `lat:lon` token used inside route fields.
inline std::string format_point(const GeoPoint& p) { return format_exact(p.lat) + ":" + format_exact(p.lon); }

inline std::optional<GeoPoint> parse_point(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto lat = parse_double(s.substr(0, colon));
    auto lon = parse_double(s.substr(colon + 1));
    if (!lat || !lon) return std::nullopt;
    return GeoPoint{*lat, *lon};
}

/// `lat:lon|lat:lon|...`; empty string for an empty list.
inline std::string format_point_list(const std::vector<GeoPoint>& pts) {
    std::string out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) out.push_back('|');
        out += format_point(pts[i]);
    }
    return out;
}

inline std::optional<std::vector<GeoPoint>> parse_point_list(std::string_view s) {
    std::vector<GeoPoint> out;
    if (s.empty()) return out;
    std::size_t pos = 0;
    while (true) {
        auto bar = s.find('|', pos);
        auto tok = s.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
        auto p = parse_point(tok);
        if (!p) return std::nullopt;
        out.push_back(*p);
        if (bar == std::string_view::npos) break;
        pos = bar + 1;
    }
    return out;
}

} // namespace cdrx
