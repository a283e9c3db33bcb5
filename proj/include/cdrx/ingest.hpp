#pragma once

#include "cdrx/core.hpp"
#include "cdrx/error.hpp"
#include "cdrx/table.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cdrx {

inline const std::vector<std::string>& cdr_columns() {
    static const std::vector<std::string> cols{"user_id", "date", "time", "duration", "lat", "lon"};
    return cols;
}

struct Rejection {
    std::size_t line = 0; // 1-based, header is line 1
    std::string reason;
    bool operator==(const Rejection&) const = default;
};

struct ParseResult {
    CdrDataset dataset;
    std::vector<Rejection> rejected;
};

struct ParseOptions {
    /// Drop byte-identical duplicate records. Off by default: identical
    /// consecutive events are legitimate in operator logs.
    bool dedup = false;
};

/// Converts one split CSV line into a record, or a rejection reason.
inline std::variant<CdrRecord, std::string> parse_cdr_fields(const std::vector<std::string>& f) {
    if (f.size() != 6) return std::string("expected 6 fields, found " + std::to_string(f.size()));
    CdrRecord r;
    r.user = f[0];
    if (r.user.empty()) return std::string("empty user id");
    auto date = Date::parse(f[1]);
    if (!date) return std::string("invalid date");
    auto time = TimeOfDay::parse(f[2]);
    if (!time) return std::string("invalid time");
    auto dur = parse_integer<std::int32_t>(f[3]);
    if (!dur) return std::string("invalid duration");
    auto lat = parse_double(f[4]);
    if (!lat) return std::string("invalid latitude");
    auto lon = parse_double(f[5]);
    if (!lon) return std::string("invalid longitude");
    r.date = *date;
    r.time = *time;
    r.duration = *dur;
    r.lat = *lat;
    r.lon = *lon;
    return r;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// Reads a raw CDR file. Well-formed in-window lines become records; every
/// other non-blank line is reported with its line number.
inline ParseResult parse_cdr_stream(std::istream& in, const ObservationWindow& window, const ParseOptions& opt = {}) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CDR file is empty: expected header " + std::string("user_id,date,time,duration,lat,lon"));
    strip_cr(line);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
        static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);
    std::vector<std::string> fields;
    if (!csv::split_line(line, fields) || fields != cdr_columns()) {
        std::string expected = "user_id,date,time,duration,lat,lon";
        throw DataError("CDR header mismatch: expected '" + expected + "', found '" + line + "'");
    }
    ParseResult out;
    std::vector<CdrRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        if (!csv::split_line(line, fields)) {
            out.rejected.push_back({lineno, "malformed quoting"});
            continue;
        }
        auto parsed = parse_cdr_fields(fields);
        if (auto* reason = std::get_if<std::string>(&parsed)) {
            out.rejected.push_back({lineno, std::move(*reason)});
            continue;
        }
        auto& rec = std::get<CdrRecord>(parsed);
        if (auto v = validate_record(rec, window); !v) {
            out.rejected.push_back({lineno, *v.rejection});
            continue;
        }
        records.push_back(std::move(rec));
    }
    if (opt.dedup) {
        std::sort(records.begin(), records.end(), canonical_less);
        records.erase(std::unique(records.begin(), records.end()), records.end());
    }
    out.dataset = CdrDataset(std::move(records), window);
    return out;
}

inline ParseResult parse_cdr_file(const std::string& path, const ObservationWindow& window, const ParseOptions& opt = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read CDR file '" + path + "'");
    return parse_cdr_stream(in, window, opt);
}

// ---------------------------------------------------------------------------
// Layer-0 table: the validated dataset in canonical order.

inline Table dataset_table(const CdrDataset& ds) {
    Table t{cdr_columns()};
    t.rows.reserve(ds.size());
    for (const auto& r : ds.records())
        t.rows.push_back({r.user, r.date.str(), r.time.str(), std::to_string(r.duration), format_exact(r.lat),
                          format_exact(r.lon)});
    return t;
}

inline CdrDataset dataset_from_table(const Table& t, const ObservationWindow& window) {
    if (t.columns != cdr_columns()) throw DataError("layer0/cdr has an unexpected schema");
    std::vector<CdrRecord> records;
    records.reserve(t.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        auto parsed = parse_cdr_fields(t.rows[i]);
        if (auto* reason = std::get_if<std::string>(&parsed))
            throw DataError("layer0/cdr row " + std::to_string(i + 1) + ": " + *reason);
        records.push_back(std::move(std::get<CdrRecord>(parsed)));
    }
    return CdrDataset(std::move(records), window);
}

inline Table rejections_table(const std::vector<Rejection>& rejected) {
    Table t{{"line", "reason"}};
    for (const auto& r : rejected) t.rows.push_back({std::to_string(r.line), r.reason});
    return t;
}

// ---------------------------------------------------------------------------
// Per-user call logs.

struct LogEntry {
    Instant instant;
    std::int32_t duration = 0;
    GeoPoint loc;

    auto operator<=>(const LogEntry&) const = default;
};

struct LocationTally {
    std::int64_t calls = 0;
    std::int64_t duration = 0;
    bool operator==(const LocationTally&) const = default;
};

/// One user's time-ordered calls plus per-location call and duration totals.
struct UserLog {
    std::string user;
    std::vector<LogEntry> entries;
    std::map<GeoPoint, LocationTally> tallies;

    bool operator==(const UserLog&) const = default;
};

/// Groups records by user. Logs are sorted by user id; entries ascend by
/// instant with (duration, lat, lon) breaking ties.
inline std::vector<UserLog> build_user_logs(const CdrDataset& ds) {
    std::map<std::string_view, std::vector<const CdrRecord*>> by_user;
    for (const auto& r : ds.records()) by_user[r.user].push_back(&r);
    std::vector<UserLog> logs;
    logs.reserve(by_user.size());
    for (auto& [user, recs] : by_user) {
        UserLog log;
        log.user = std::string(user);
        log.entries.reserve(recs.size());
        for (const auto* r : recs) {
            log.entries.push_back({r->instant(), r->duration, r->loc()});
            auto& tally = log.tallies[r->loc()];
            tally.calls += 1;
            tally.duration += r->duration;
        }
        std::sort(log.entries.begin(), log.entries.end());
        logs.push_back(std::move(log));
    }
    return logs;
}

/// `layer1/user_logs`: `user_id,lat,lon,num_calls,total_duration`.
inline Table user_logs_table(const std::vector<UserLog>& logs) {
    Table t{{"user_id", "lat", "lon", "num_calls", "total_duration"}};
    for (const auto& log : logs)
        for (const auto& [loc, tally] : log.tallies)
            t.rows.push_back({log.user, format_exact(loc.lat), format_exact(loc.lon), std::to_string(tally.calls),
                              std::to_string(tally.duration)});
    return t;
}

} // namespace cdrx
