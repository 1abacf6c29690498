// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gridforge {

enum class FieldType { string_type, number, integer, boolean, date, datetime };

std::string to_string(FieldType t);
FieldType field_type_from_string(std::string_view s); // throws ConfigError

struct FieldConstraints {
    std::optional<double> minimum;
    std::optional<double> maximum;
    std::vector<std::string> enum_values;

    bool empty() const { return !minimum && !maximum && enum_values.empty(); }
};

struct FieldSchema {
    std::string name;
    FieldType type = FieldType::string_type;
    std::string description;
    std::optional<std::string> unit;
    FieldConstraints constraints;
};

/// One CSV file of a package plus its schema. Marker companions pair a data
/// field with the string column carrying its provenance flags.
struct Resource {
    std::string name;
    std::string path; // relative, below the package root
    std::vector<FieldSchema> schema;
    std::map<std::string, std::string> marker_companions; // data field -> marker field
};

/// NA is monostate and renders as the empty string — never as zero.
using CellValue = std::variant<std::monostate, std::string, double, std::int64_t, bool, Date,
                               UtcTime, MarkerSet>;
using Row = std::vector<CellValue>;

/// Renders rows under the canonical CSV contract: UTF-8, comma, LF, header
/// from the schema, shortest round-trip numbers, ISO dates, sorted marker
/// joins. Byte-identical across runs for identical input.
std::string write_csv(const Resource& resource, const std::vector<Row>& rows);

struct PackageMeta {
    std::string name;
    std::string version;
    UtcTime created;
    std::string description;
    std::vector<std::pair<std::string, std::string>> sources; // title, origin
    std::vector<std::string> contributors;
};

/// Canonical descriptor serialization: sorted keys, two-space indent, LF.
std::string build_descriptor(const std::vector<Resource>& resources, const PackageMeta& meta,
                             const std::map<std::string, std::string>& checksums);

struct PackageIssue {
    std::string path; // offending file, or "datapackage.json"
    std::optional<std::size_t> row; // 1-based data row
    std::optional<std::string> column;
    std::string message;
};

std::vector<PackageIssue> validate_package(const std::filesystem::path& dir);

struct StampResult {
    std::string stable_id; // "<name>/<version>"
    std::map<std::string, std::string> checksums;
};

/// Records a version: verifies the package, pins the version in the
/// descriptor, writes the checksums.txt manifest and the write-once version
/// ledger. Restamping an existing version is a no-op for identical content
/// and an error otherwise.
StampResult version_stamp(const std::filesystem::path& dir, const std::string& version);

/// Writes resources and descriptor into `dir` (creating it), with checksums
/// computed over the freshly written files.
void write_package(const std::filesystem::path& dir, const PackageMeta& meta,
                   const std::vector<std::pair<Resource, std::vector<Row>>>& resources);

} // namespace gridforge
