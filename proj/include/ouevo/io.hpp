#pragma once

#include "ouevo/errors.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ouevo {

/// 64-bit FNV-1a hash of the canonical (sorted-key, compact) JSON dump, as hex.
inline std::string config_hash(const nlohmann::json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Shortest round-trip decimal representation.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes to `path.tmp` and renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("out: cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw ConfigError("out: write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

/// Numeric table rendered as CSV with a config-hash line and a timestamp line.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add(const std::vector<double>& row) {
        std::vector<std::string> cells;
        cells.reserve(row.size());
        for (double v : row) cells.push_back(format_number(v));
        rows_.push_back(std::move(cells));
    }
    void add_cells(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    [[nodiscard]] std::size_t size() const { return rows_.size(); }

    /// The timestamp line starts with "# generated=" so comparisons can drop it.
    [[nodiscard]] std::string render(const std::string& hash, bool timestamp = true) const {
        std::string s = "# config_hash=" + hash + "\n";
        if (timestamp) s += "# generated=" + utc_timestamp() + "\n";
        s += join(columns_);
        for (const auto& r : rows_) s += join(r);
        return s;
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += cells[i];
        }
        return s + "\n";
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace ouevo
