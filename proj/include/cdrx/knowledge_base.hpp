#pragma once

#include "cdrx/digest.hpp"
#include "cdrx/error.hpp"
#include "cdrx/table.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>
#include <vector>

namespace cdrx {

/// Layer 0 holds the raw records, 1..5 the derived layers.
inline constexpr int raw_layer = 0;
inline constexpr int max_layer = 5;
/// Reader index for consumers that run after the last layer (report,
/// export, scoring).
inline constexpr int consumer_layer = max_layer + 1;

struct CommitReceipt {
    int layer = 0;
    std::string table;
    std::size_t rows = 0;
    std::string digest;
};

/// Throws HierarchyViolation unless `reader_layer` may consume `layer`.
inline void check_hierarchical_read(int layer, int reader_layer) {
    if (layer >= reader_layer)
        throw HierarchyViolation("hierarchical read violation: layer " + std::to_string(reader_layer) +
                                 " may not read layer " + std::to_string(layer));
}

/// File-backed layered store. Every table lives at `<root>/layer<N>/<name>.csv`.
///
/// Writers publish atomically: a single table is written to a temporary file
/// and renamed over the old one; a whole layer is staged in a sibling
/// directory and swapped in, so re-running a layer never leaves a mix of old
/// and new tables visible. Readers must name their own layer, and may only
/// read strictly lower layers.
class KnowledgeBase {
public:
    explicit KnowledgeBase(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw DataError("cannot create knowledge base at '" + root_.string() + "': " + ec.message());
    }

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path layer_dir(int layer) const { return root_ / ("layer" + std::to_string(layer)); }

    std::filesystem::path table_path(int layer, std::string_view name) const {
        return layer_dir(layer) / (std::string(name) + ".csv");
    }

    bool contains(int layer, std::string_view name) const {
        return std::filesystem::is_regular_file(table_path(layer, name));
    }

    /// Atomically replaces one table.
    CommitReceipt write(int layer, std::string_view name, const Table& table) {
        check_layer(layer);
        check_name(name);
        std::string bytes = csv::serialize(table);
        auto dir = layer_dir(layer);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
        auto final_path = table_path(layer, name);
        auto tmp = final_path;
        tmp += ".tmp" + std::to_string(::getpid());
        write_file(tmp, bytes);
        std::filesystem::rename(tmp, final_path, ec);
        if (ec) {
            std::filesystem::remove(tmp);
            throw DataError("cannot publish '" + final_path.string() + "': " + ec.message());
        }
        return {layer, std::string(name), table.size(), sha256_hex(bytes)};
    }

    /// Reads a table on behalf of a producer running at `reader_layer`.
    Table read(int layer, std::string_view name, int reader_layer) const {
        check_layer(layer);
        check_hierarchical_read(layer, reader_layer);
        auto path = table_path(layer, name);
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw DependencyError("layer dependency not yet computed: layer" + std::to_string(layer) + "/" +
                                  std::string(name));
        std::ostringstream ss;
        ss << in.rdbuf();
        return csv::parse(ss.str());
    }

    /// Digest of one stored table, as reported by the receipt that wrote it.
    std::string table_digest(int layer, std::string_view name) const {
        auto path = table_path(layer, name);
        if (!std::filesystem::is_regular_file(path))
            throw DependencyError("layer dependency not yet computed: layer" + std::to_string(layer) + "/" +
                                  std::string(name));
        return sha256_file(path.string());
    }

    /// Table names of one layer, sorted.
    std::vector<std::string> tables(int layer) const {
        std::vector<std::string> out;
        auto dir = layer_dir(layer);
        if (!std::filesystem::is_directory(dir)) return out;
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
            out.push_back(e.path().stem().string());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Digest over every table of every layer: identical logical content
    /// gives the identical value.
    std::string digest() const {
        Sha256 h;
        for (int layer = raw_layer; layer <= max_layer; ++layer)
            for (const auto& name : tables(layer))
                h.update(std::to_string(layer)).update("/").update(name).update("=").update(table_digest(layer, name)).update("\n");
        return h.hex();
    }

    /// Collects the tables of one layer and publishes them together.
    class LayerTransaction {
    public:
        LayerTransaction(KnowledgeBase& kb, int layer) : kb_(kb), layer_(layer) { check_layer(layer); }

        void put(std::string_view name, Table table) {
            check_name(name);
            tables_[std::string(name)] = std::move(table);
        }

        /// Replaces the whole layer directory with the staged tables.
        std::vector<CommitReceipt> commit() {
            namespace fs = std::filesystem;
            auto final_dir = kb_.layer_dir(layer_);
            auto pid = std::to_string(::getpid());
            auto staging = kb_.root() / (".layer" + std::to_string(layer_) + ".staging" + pid);
            auto old = kb_.root() / (".layer" + std::to_string(layer_) + ".old" + pid);
            std::error_code ec;
            fs::remove_all(staging, ec);
            fs::create_directories(staging, ec);
            if (ec) throw DataError("cannot stage layer " + std::to_string(layer_) + ": " + ec.message());
            std::vector<CommitReceipt> receipts;
            try {
                for (const auto& [name, table] : tables_) {
                    std::string bytes = csv::serialize(table);
                    write_file(staging / (name + ".csv"), bytes);
                    receipts.push_back({layer_, name, table.size(), sha256_hex(bytes)});
                }
            } catch (...) {
                fs::remove_all(staging, ec);
                throw;
            }
            fs::remove_all(old, ec);
            bool had_old = fs::exists(final_dir);
            if (had_old) {
                fs::rename(final_dir, old, ec);
                if (ec) throw DataError("cannot retire layer " + std::to_string(layer_) + ": " + ec.message());
            }
            fs::rename(staging, final_dir, ec);
            if (ec) {
                if (had_old) fs::rename(old, final_dir);
                throw DataError("cannot publish layer " + std::to_string(layer_) + ": " + ec.message());
            }
            fs::remove_all(old, ec);
            tables_.clear();
            return receipts;
        }

    private:
        KnowledgeBase& kb_;
        int layer_;
        std::map<std::string, Table> tables_;
    };

private:
    static void check_layer(int layer) {
        if (layer < raw_layer || layer > max_layer)
            throw ConfigError("layer index " + std::to_string(layer) + " outside 0.." + std::to_string(max_layer));
    }

    static void check_name(std::string_view name) {
        if (name.empty() || name.find_first_of("/\\.") != std::string_view::npos)
            throw ConfigError("invalid table name '" + std::string(name) + "'");
    }

    static void write_file(const std::filesystem::path& path, const std::string& bytes) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + path.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(path);
            throw DataError("short write to '" + path.string() + "'");
        }
    }

    std::filesystem::path root_;
};

/// Holds `<root>/.lock` for the lifetime of a pipeline run.
class KbLock {
public:
    explicit KbLock(const std::filesystem::path& root) : path_(root / ".lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw ConfigError("knowledge base '" + root.string() + "' is locked by another run (" + path_.string() + ")");
        std::fprintf(f, "%d\n", static_cast<int>(::getpid()));
        std::fclose(f);
    }
    ~KbLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    KbLock(const KbLock&) = delete;
    KbLock& operator=(const KbLock&) = delete;

private:
    std::filesystem::path path_;
};

} // namespace cdrx
