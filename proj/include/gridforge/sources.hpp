// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace gridforge {

enum class Encoding { utf8, latin1 };

/// Per-source CSV conventions. Raw files come with every combination of
/// separators and NA spellings; the dialect makes them explicit data.
struct Dialect {
    char delimiter = ',';
    char decimal_separator = '.';
    std::optional<char> thousands_separator;
    Encoding encoding = Encoding::utf8;
    int header_rows = 1;
    std::set<std::string> na_tokens = {""};

    void validate() const; // throws ConfigError
};

/// Declarative description of one raw source: where it lives, how to read
/// it, and how its columns map onto canonical names. One file per source,
/// no per-source code.
struct SourceDescriptor {
    std::string id;
    std::string origin; // URL or local path
    Dialect dialect;
    std::vector<std::pair<std::string, std::string>> column_map; // source -> canonical
    std::optional<std::string> vocab_map_id;
    std::string timezone = "UTC";
    std::string notes;
};

SourceDescriptor load_descriptor(const std::filesystem::path& path);
SourceDescriptor descriptor_from_json(const nlohmann::json& doc, const std::string& context);

/// A parsed source table: canonical column names, all cells still strings
/// (or NA). Numeric and temporal interpretation happens downstream.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<std::string>>> rows;
    std::string source_id;

    std::size_t column_index(std::string_view name) const; // throws InvalidArgument

    bool operator==(const RawTable&) const = default;
};

RawTable parse_table(std::string_view bytes, const Dialect& dialect,
                     const std::vector<std::pair<std::string, std::string>>& column_map,
                     std::string source_id = {});

/// Serializes a table back out under the same dialect; parse_table is its
/// inverse over the canonical identity column map.
std::string write_table(const RawTable& table, const Dialect& dialect);

/// Locale-aware numeric cell interpretation. NA stays NA; "0" is 0.0 and
/// never NA — the zero-vs-not-available distinction starts here.
std::optional<double> parse_number(const std::optional<std::string>& cell,
                                   const Dialect& dialect);

// ---------------------------------------------------------------------------
// Snapshot cache: immutable content-addressed copies of every original
// input, so a package can always be rebuilt from the exact bytes it saw.

struct CacheEntry {
    std::string source_id;
    UtcTime retrieved_at;
    std::string content_hash; // sha256 hex
    std::string stored_path;  // relative to the cache dir
};

class SnapshotCache {
public:
    explicit SnapshotCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    /// Stores `bytes` immutably under its content hash. Re-snapshotting
    /// identical bytes reuses the stored file and returns the same hash.
    CacheEntry snapshot(const std::string& source_id, std::string_view bytes);

    std::optional<CacheEntry> latest(const std::string& source_id) const;
    std::vector<CacheEntry> entries() const;
    std::string read(const CacheEntry& entry) const;

private:
    void load_index();
    void save_index() const;

    std::filesystem::path dir_;
    std::vector<CacheEntry> entries_;
};

CacheEntry snapshot_source(const SourceDescriptor& desc, std::string_view bytes,
                           const std::filesystem::path& cache_dir);

} // namespace gridforge
