#pragma once

#include "cdrx/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cdrx {

inline constexpr std::int64_t seconds_per_day = 86400;

namespace detail {

inline bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline void append_padded(std::string& out, int value, int width) {
    std::array<char, 16> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    int len = static_cast<int>(ptr - buf.data());
    for (int i = len; i < width; ++i) out.push_back('0');
    out.append(buf.data(), ptr);
}

} // namespace detail

/// Day of the week, Sunday-based like std::chrono::weekday::c_encoding().
enum class Weekday : std::uint8_t { sunday, monday, tuesday, wednesday, thursday, friday, saturday };

inline constexpr std::array<std::string_view, 7> weekday_names{
    "Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday"};

inline std::string_view to_string(Weekday d) { return weekday_names[static_cast<int>(d)]; }

/// Case-insensitive full weekday name.
inline std::optional<Weekday> parse_weekday(std::string_view s) {
    auto lower = [](char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; };
    for (std::size_t i = 0; i < weekday_names.size(); ++i) {
        auto n = weekday_names[i];
        if (n.size() == s.size() && std::equal(n.begin(), n.end(), s.begin(), [&](char a, char b) { return lower(a) == lower(b); }))
            return static_cast<Weekday>(i);
    }
    return std::nullopt;
}

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static std::optional<Date> from_ymd(int y, unsigned m, unsigned d) {
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) return std::nullopt;
        return Date{static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
    }

    /// Strict ISO-8601 `YYYY-MM-DD`.
    static std::optional<Date> parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        int y = 0, m = 0, d = 0;
        if (!detail::parse_fixed_int(s.substr(0, 4), y) || !detail::parse_fixed_int(s.substr(5, 2), m) ||
            !detail::parse_fixed_int(s.substr(8, 2), d))
            return std::nullopt;
        return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    }

    constexpr std::int32_t days() const { return days_; }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }

    Weekday weekday() const {
        return static_cast<Weekday>(
            std::chrono::weekday{std::chrono::sys_days{std::chrono::days{days_}}}.c_encoding());
    }

    std::string str() const {
        auto v = ymd();
        std::string out;
        detail::append_padded(out, static_cast<int>(v.year()), 4);
        out.push_back('-');
        detail::append_padded(out, static_cast<int>(static_cast<unsigned>(v.month())), 2);
        out.push_back('-');
        detail::append_padded(out, static_cast<int>(static_cast<unsigned>(v.day())), 2);
        return out;
    }

    constexpr Date operator+(std::int32_t n) const { return Date{days_ + n}; }
    constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

/// Seconds after local midnight, 0..86399.
class TimeOfDay {
public:
    constexpr TimeOfDay() = default;
    constexpr explicit TimeOfDay(std::int32_t seconds) : seconds_(seconds) {}

    static constexpr std::optional<TimeOfDay> hms(int h, int m = 0, int s = 0) {
        if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) return std::nullopt;
        return TimeOfDay{h * 3600 + m * 60 + s};
    }

    /// Hour-of-day shorthand used for window bounds; 24 maps to midnight.
    static constexpr TimeOfDay hour(int h) { return TimeOfDay{(h % 24) * 3600}; }

    /// Strict 24-hour `HH:MM:SS`.
    static std::optional<TimeOfDay> parse(std::string_view s) {
        if (s.size() != 8 || s[2] != ':' || s[5] != ':') return std::nullopt;
        int h = 0, m = 0, sec = 0;
        if (!detail::parse_fixed_int(s.substr(0, 2), h) || !detail::parse_fixed_int(s.substr(3, 2), m) ||
            !detail::parse_fixed_int(s.substr(6, 2), sec))
            return std::nullopt;
        return hms(h, m, sec);
    }

    constexpr std::int32_t seconds() const { return seconds_; }
    constexpr int hours() const { return seconds_ / 3600; }
    constexpr double fractional_hours() const { return seconds_ / 3600.0; }

    std::string str() const {
        std::string out;
        detail::append_padded(out, seconds_ / 3600, 2);
        out.push_back(':');
        detail::append_padded(out, (seconds_ / 60) % 60, 2);
        out.push_back(':');
        detail::append_padded(out, seconds_ % 60, 2);
        return out;
    }

    constexpr auto operator<=>(const TimeOfDay&) const = default;

private:
    std::int32_t seconds_ = 0;
};

/// A point in local city time, as seconds since 1970-01-01T00:00:00.
class Instant {
public:
    constexpr Instant() = default;
    constexpr explicit Instant(std::int64_t seconds) : seconds_(seconds) {}
    constexpr Instant(Date d, TimeOfDay t) : seconds_(std::int64_t{d.days()} * seconds_per_day + t.seconds()) {}

    constexpr std::int64_t seconds() const { return seconds_; }

    constexpr Date date() const {
        std::int64_t d = seconds_ >= 0 ? seconds_ / seconds_per_day : (seconds_ - seconds_per_day + 1) / seconds_per_day;
        return Date{static_cast<std::int32_t>(d)};
    }
    constexpr TimeOfDay time() const {
        return TimeOfDay{static_cast<std::int32_t>(seconds_ - std::int64_t{date().days()} * seconds_per_day)};
    }

    std::string str() const { return date().str() + "T" + time().str(); }

    constexpr Instant operator+(std::int64_t s) const { return Instant{seconds_ + s}; }
    constexpr std::int64_t operator-(Instant o) const { return seconds_ - o.seconds_; }
    constexpr auto operator<=>(const Instant&) const = default;

private:
    std::int64_t seconds_ = 0;
};

/// Inclusive observation window.
struct ObservationWindow {
    Instant start;
    Instant end;

    constexpr bool contains(Instant t) const { return start <= t && t <= end; }

    /// Whole days `[first, first + days)`.
    static ObservationWindow days_from(Date first, int days) {
        return {Instant{first, TimeOfDay{0}}, Instant{first + days, TimeOfDay{0}} + (-1)};
    }

    constexpr bool operator==(const ObservationWindow&) const = default;
};

enum class WindowLabel : std::uint8_t {
    night,
    morning,
    midday,
    evening,
    late_night,
    working_hours,
    off_hours,
    custom,
};

inline constexpr std::array<std::string_view, 8> window_label_names{
    "NIGHT", "MORNING", "MIDDAY", "EVENING", "LATE_NIGHT", "WORKING_HOURS", "OFF_HOURS", "CUSTOM"};

inline std::string_view to_string(WindowLabel l) { return window_label_names[static_cast<int>(l)]; }

/// Half-open time-of-day window `[start, end)`; `end < start` wraps past midnight.
class TimeWindow {
public:
    TimeWindow(WindowLabel label, TimeOfDay start, TimeOfDay end) : label_(label), start_(start), end_(end) {
        if (start == end) throw ConfigError("time window start and end must differ");
    }

    static TimeWindow hours(WindowLabel label, int start_hour, int end_hour) {
        return TimeWindow{label, TimeOfDay::hour(start_hour), TimeOfDay::hour(end_hour)};
    }

    WindowLabel label() const { return label_; }
    TimeOfDay start() const { return start_; }
    TimeOfDay end() const { return end_; }
    bool wraps() const { return end_ < start_; }

    bool contains(TimeOfDay t) const {
        if (!wraps()) return start_ <= t && t < end_;
        return t >= start_ || t < end_;
    }

    /// Window length in seconds.
    std::int32_t length() const {
        return wraps() ? static_cast<std::int32_t>(seconds_per_day) - start_.seconds() + end_.seconds()
                       : end_.seconds() - start_.seconds();
    }

    /// `HH:MM-HH:MM` form used in knowledge-base rows.
    std::string span_str() const { return start_.str().substr(0, 5) + "-" + end_.str().substr(0, 5); }

    /// Parses `HH:MM-HH:MM` (or `HH-HH`).
    static std::optional<TimeWindow> parse_span(WindowLabel label, std::string_view s) {
        auto dash = s.find('-');
        if (dash == std::string_view::npos) return std::nullopt;
        auto one = [](std::string_view p) -> std::optional<TimeOfDay> {
            int h = 0, m = 0;
            if (p.size() == 5 && p[2] == ':') {
                if (!detail::parse_fixed_int(p.substr(0, 2), h) || !detail::parse_fixed_int(p.substr(3, 2), m))
                    return std::nullopt;
            } else if (!detail::parse_fixed_int(p, h)) {
                return std::nullopt;
            }
            if (h == 24 && m == 0) return TimeOfDay{0};
            return TimeOfDay::hms(h, m, 0);
        };
        auto a = one(s.substr(0, dash));
        auto b = one(s.substr(dash + 1));
        if (!a || !b || *a == *b) return std::nullopt;
        return TimeWindow{label, *a, *b};
    }

    bool operator==(const TimeWindow&) const = default;

private:
    WindowLabel label_;
    TimeOfDay start_;
    TimeOfDay end_;
};

/// The four day-part slots used for activity histograms: NIGHT 00-06,
/// MORNING 06-10, MIDDAY 10-17, EVENING 17-24.
inline std::array<TimeWindow, 4> default_day_slots() {
    return {TimeWindow::hours(WindowLabel::night, 0, 6), TimeWindow::hours(WindowLabel::morning, 6, 10),
            TimeWindow::hours(WindowLabel::midday, 10, 17), TimeWindow::hours(WindowLabel::evening, 17, 24)};
}

struct DateRange {
    Date first;
    Date last; // inclusive
    constexpr bool contains(Date d) const { return first <= d && d <= last; }
};

/// How a period treats the city's weekend day.
enum class WeekendRule : std::uint8_t {
    ignore,       // weekend days behave like any other day
    whole_day,    // every second of the weekend day belongs to the period
    exclude,      // the weekend day never belongs to the period
};

/// A selection of instants: optional time-of-day window, optional date range,
/// and a weekend rule. Working hours use `exclude`, off-hours use `whole_day`.
struct Period {
    std::optional<TimeWindow> hours;
    std::optional<DateRange> dates;
    std::optional<Weekday> weekend;
    WeekendRule weekend_rule = WeekendRule::ignore;

    bool contains(Instant t) const {
        Date d = t.date();
        if (dates && !dates->contains(d)) return false;
        if (weekend && weekend_rule != WeekendRule::ignore && d.weekday() == *weekend)
            return weekend_rule == WeekendRule::whole_day;
        return !hours || hours->contains(t.time());
    }

    static Period all() { return {}; }
    static Period of(TimeWindow w) { return Period{w, std::nullopt, std::nullopt, WeekendRule::ignore}; }
};

} // namespace cdrx
