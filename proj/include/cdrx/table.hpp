#pragma once

#include "cdrx/error.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cdrx {

/// A named-column text table: the unit of storage in the knowledge base.
///
/// Dialect: comma separated, `\n` line ends, one header line. A field is
/// wrapped in double quotes when it contains a comma, a quote, CR or LF; a
/// quote inside a quoted field is doubled. Serialisation is a pure function
/// of the cell strings, so equal tables always produce equal bytes.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    Table() = default;
    explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}
    Table(std::vector<std::string> cols, std::vector<std::vector<std::string>> body) : columns(std::move(cols)) {
        for (auto& r : body) add(std::move(r));
    }

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    void add(std::vector<std::string> row) {
        if (row.size() != columns.size())
            throw DataError("row has " + std::to_string(row.size()) + " fields, table has " +
                            std::to_string(columns.size()) + " columns");
        rows.push_back(std::move(row));
    }

    /// Index of `name`; throws DataError when the table lacks the column.
    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw DataError("table has no column '" + std::string(name) + "'");
    }

    bool operator==(const Table&) const = default;
};

namespace csv {

inline bool needs_quotes(std::string_view f) {
    return f.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void append_field(std::string& out, std::string_view f) {
    if (!needs_quotes(f)) {
        out.append(f);
        return;
    }
    out.push_back('"');
    for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

inline void append_row(std::string& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        append_field(out, fields[i]);
    }
    out.push_back('\n');
}

inline std::string serialize(const Table& t) {
    std::string out;
    append_row(out, t.columns);
    for (const auto& r : t.rows) append_row(out, r);
    return out;
}

/// Splits one unquoted-newline line into fields. Returns false on a
/// malformed quote.
inline bool split_line(std::string_view line, std::vector<std::string>& out) {
    out.clear();
    std::string cur;
    bool quoted = false;
    bool field_was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
            field_was_quoted = false;
        } else if (c == '"' && cur.empty() && !field_was_quoted) {
            quoted = true;
            field_was_quoted = true;
        } else if (field_was_quoted) {
            return false; // text after closing quote
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) return false;
    out.push_back(std::move(cur));
    return true;
}

/// Parses a whole document produced by `serialize`. Quoted fields may span
/// lines.
inline Table parse(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool after_quote = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                    after_quote = true;
                }
            } else {
                cur.push_back(c);
            }
            continue;
        }
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            after_quote = false;
            any = true;
        } else if (c == '\n') {
            fields.push_back(std::move(cur));
            cur.clear();
            records.push_back(std::move(fields));
            fields.clear();
            after_quote = false;
            any = false;
        } else if (c == '"' && cur.empty() && !after_quote) {
            quoted = true;
            any = true;
        } else if (after_quote) {
            throw DataError("malformed quoted field in table");
        } else {
            cur.push_back(c);
            any = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted field in table");
    if (any || !cur.empty()) {
        fields.push_back(std::move(cur));
        records.push_back(std::move(fields));
    }
    if (records.empty()) throw DataError("table has no header line");
    Table t{std::move(records.front())};
    for (std::size_t i = 1; i < records.size(); ++i) {
        // A header-only single empty column serialises rows as empty lines.
        if (records[i].size() != t.columns.size())
            throw DataError("table row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                            " fields, expected " + std::to_string(t.columns.size()));
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

} // namespace csv
} // namespace cdrx
