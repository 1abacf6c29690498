// SPDX-License-Identifier: Apache-2.0
#include "gridforge/datapackage.hpp"

#include "gridforge/csv.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

namespace gridforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* descriptor_name = "datapackage.json";
constexpr const char* manifest_name = "checksums.txt";
constexpr const char* ledger_name = "versions.json";

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

bool safe_relative_path(const std::string& path)
{
    if (path.empty() || path.front() == '/')
        return false;
    if (path.find("..") != std::string::npos)
        return false;
    return true;
}

std::string render_cell(const CellValue& value, const FieldSchema& field, std::size_t row,
                        const std::string& resource)
{
    auto mismatch = [&](const char* got) -> std::string {
        throw InvalidArgument("resource \"" + resource + "\" row " + std::to_string(row) +
                              " column \"" + field.name + "\": cannot render " + got +
                              " as " + to_string(field.type));
    };
    return std::visit(
        [&](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return "";
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (field.type != FieldType::string_type)
                    return mismatch("string");
                return v;
            } else if constexpr (std::is_same_v<T, double>) {
                if (field.type != FieldType::number)
                    return mismatch("number");
                return format_number(v);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                if (field.type != FieldType::integer)
                    return mismatch("integer");
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                if (field.type != FieldType::boolean)
                    return mismatch("boolean");
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, Date>) {
                if (field.type != FieldType::date)
                    return mismatch("date");
                return v.to_iso();
            } else if constexpr (std::is_same_v<T, UtcTime>) {
                if (field.type != FieldType::datetime)
                    return mismatch("datetime");
                return v.to_iso();
            } else { // MarkerSet
                if (field.type != FieldType::string_type)
                    return mismatch("marker set");
                return v.to_string();
            }
        },
        value);
}

json constraints_to_json(const FieldConstraints& c)
{
    json out = json::object();
    if (c.minimum)
        out["minimum"] = *c.minimum;
    if (c.maximum)
        out["maximum"] = *c.maximum;
    if (!c.enum_values.empty())
        out["enum"] = c.enum_values;
    return out;
}

void check_resource(const Resource& r)
{
    if (r.name.empty())
        throw ConfigError("resource needs a name");
    if (!safe_relative_path(r.path))
        throw ConfigError("resource \"" + r.name + "\" path must stay under the package root");
    std::set<std::string> names;
    for (const FieldSchema& f : r.schema)
        if (!names.insert(f.name).second)
            throw ConfigError("resource \"" + r.name + "\" has duplicate field \"" + f.name +
                              "\"");
    for (const auto& [data_field, marker_field] : r.marker_companions) {
        if (!names.count(data_field))
            throw ConfigError("resource \"" + r.name + "\": marker companion for unknown field \"" +
                              data_field + "\"");
        if (!names.count(marker_field))
            throw ConfigError("resource \"" + r.name + "\": marker field \"" + marker_field +
                              "\" missing from schema");
    }
}

} // namespace

std::string to_string(FieldType t)
{
    switch (t) {
    case FieldType::string_type: return "string";
    case FieldType::number: return "number";
    case FieldType::integer: return "integer";
    case FieldType::boolean: return "boolean";
    case FieldType::date: return "date";
    case FieldType::datetime: return "datetime";
    }
    return "string";
}

FieldType field_type_from_string(std::string_view s)
{
    if (s == "string")
        return FieldType::string_type;
    if (s == "number")
        return FieldType::number;
    if (s == "integer")
        return FieldType::integer;
    if (s == "boolean")
        return FieldType::boolean;
    if (s == "date")
        return FieldType::date;
    if (s == "datetime")
        return FieldType::datetime;
    throw ConfigError("unknown field type \"" + std::string(s) + "\"");
}

// ---------------------------------------------------------------------------
// CSV writing

std::string write_csv(const Resource& resource, const std::vector<Row>& rows)
{
    check_resource(resource);
    std::string out;
    std::vector<std::string> header;
    for (const FieldSchema& f : resource.schema)
        header.push_back(f.name);
    csv::append_record(out, header, ',');

    std::vector<std::string> rendered;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Row& row = rows[r];
        if (row.size() != resource.schema.size())
            throw InvalidArgument("resource \"" + resource.name + "\" row " +
                                  std::to_string(r + 1) + " has " +
                                  std::to_string(row.size()) + " cells, schema has " +
                                  std::to_string(resource.schema.size()));
        rendered.clear();
        for (std::size_t c = 0; c < row.size(); ++c)
            rendered.push_back(render_cell(row[c], resource.schema[c], r + 1, resource.name));
        csv::append_record(out, rendered, ',');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Descriptor

std::string build_descriptor(const std::vector<Resource>& resources, const PackageMeta& meta,
                             const std::map<std::string, std::string>& checksums)
{
    if (resources.empty())
        throw InvalidArgument("package must contain at least one resource");
    if (meta.name.empty())
        throw ConfigError("package needs a name");
    std::set<std::string> names;
    for (const Resource& r : resources) {
        check_resource(r);
        if (!names.insert(r.name).second)
            throw InvalidArgument("duplicate resource name \"" + r.name + "\"");
    }

    json doc;
    doc["profile"] = "tabular-data-package";
    doc["name"] = meta.name;
    doc["version"] = meta.version;
    doc["created"] = meta.created.to_iso();
    if (!meta.description.empty())
        doc["description"] = meta.description;
    json sources = json::array();
    for (const auto& [title, origin] : meta.sources)
        sources.push_back({{"title", title}, {"path", origin}});
    doc["sources"] = std::move(sources);
    json contributors = json::array();
    for (const std::string& c : meta.contributors)
        contributors.push_back({{"title", c}});
    doc["contributors"] = std::move(contributors);

    json res_list = json::array();
    for (const Resource& r : resources) {
        json res;
        res["profile"] = "tabular-data-resource";
        res["name"] = r.name;
        res["path"] = r.path;
        res["format"] = "csv";
        res["mediatype"] = "text/csv";
        res["encoding"] = "utf-8";
        json fields = json::array();
        for (const FieldSchema& f : r.schema) {
            json field;
            field["name"] = f.name;
            field["type"] = to_string(f.type);
            if (!f.description.empty())
                field["description"] = f.description;
            if (f.unit)
                field["unit"] = *f.unit;
            if (!f.constraints.empty())
                field["constraints"] = constraints_to_json(f.constraints);
            fields.push_back(std::move(field));
        }
        res["schema"] = {{"fields", std::move(fields)}};
        if (!r.marker_companions.empty()) {
            json companions = json::object();
            for (const auto& [data_field, marker_field] : r.marker_companions)
                companions[data_field] = marker_field;
            res["x_gridforge"] = {{"marker_companions", std::move(companions)}};
        }
        res_list.push_back(std::move(res));
    }
    doc["resources"] = std::move(res_list);

    json digest_map = json::object();
    for (const auto& [path, digest] : checksums)
        digest_map[path] = digest;
    doc["x_gridforge"] = {{"checksums", std::move(digest_map)}};

    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

namespace {

struct ParsedDescriptor {
    std::string name;
    std::string version;
    std::vector<Resource> resources;
    std::map<std::string, std::string> checksums;
};

// Shape checks double as the validation pass over hand-edited descriptors;
// every problem lands in `issues` instead of throwing.
std::optional<ParsedDescriptor> parse_descriptor(const json& doc,
                                                 std::vector<PackageIssue>& issues)
{
    auto issue = [&](std::string message, std::optional<std::string> column = {}) {
        issues.push_back({descriptor_name, std::nullopt, std::move(column),
                          std::move(message)});
    };
    if (!doc.is_object()) {
        issue("descriptor must be a JSON object");
        return std::nullopt;
    }
    ParsedDescriptor out;
    if (!doc.contains("name") || !doc["name"].is_string() ||
        doc["name"].get<std::string>().empty()) {
        issue("descriptor lacks a package name");
        return std::nullopt;
    }
    out.name = doc["name"].get<std::string>();
    out.version = doc.value("version", "");
    if (doc.contains("created")) {
        try {
            UtcTime::parse_iso(doc["created"].get<std::string>());
        } catch (const Error& e) {
            issue(std::string("bad created timestamp: ") + e.what(), "created");
        }
    }
    if (!doc.contains("resources") || !doc["resources"].is_array() ||
        doc["resources"].empty()) {
        issue("package must contain at least one resource");
        return std::nullopt;
    }
    std::set<std::string> names;
    for (const json& res : doc["resources"]) {
        Resource r;
        if (!res.is_object() || !res.contains("name") || !res["name"].is_string() ||
            !res.contains("path") || !res["path"].is_string()) {
            issue("resource entries need string name and path");
            return std::nullopt;
        }
        r.name = res["name"].get<std::string>();
        r.path = res["path"].get<std::string>();
        if (!names.insert(r.name).second)
            issue("duplicate resource name \"" + r.name + "\"");
        if (!safe_relative_path(r.path)) {
            issue("resource \"" + r.name + "\" path escapes the package root");
            continue;
        }
        if (!res.contains("schema") || !res["schema"].is_object() ||
            !res["schema"].contains("fields") || !res["schema"]["fields"].is_array()) {
            issue("resource \"" + r.name + "\" lacks a schema");
            continue;
        }
        std::set<std::string> field_names;
        bool fields_ok = true;
        for (const json& f : res["schema"]["fields"]) {
            FieldSchema field;
            if (!f.is_object() || !f.contains("name") || !f["name"].is_string() ||
                !f.contains("type") || !f["type"].is_string()) {
                issue("resource \"" + r.name + "\" has a malformed field entry");
                fields_ok = false;
                break;
            }
            field.name = f["name"].get<std::string>();
            try {
                field.type = field_type_from_string(f["type"].get<std::string>());
            } catch (const ConfigError& e) {
                issue(e.what(), field.name);
                fields_ok = false;
                break;
            }
            if (!field_names.insert(field.name).second) {
                issue("resource \"" + r.name + "\" has duplicate field \"" + field.name +
                      "\"");
                fields_ok = false;
                break;
            }
            if (f.contains("constraints") && f["constraints"].is_object()) {
                const json& c = f["constraints"];
                if (c.contains("minimum") && c["minimum"].is_number())
                    field.constraints.minimum = c["minimum"].get<double>();
                if (c.contains("maximum") && c["maximum"].is_number())
                    field.constraints.maximum = c["maximum"].get<double>();
                if (c.contains("enum") && c["enum"].is_array())
                    for (const json& v : c["enum"])
                        if (v.is_string())
                            field.constraints.enum_values.push_back(v.get<std::string>());
            }
            r.schema.push_back(std::move(field));
        }
        if (!fields_ok)
            continue;
        if (res.contains("x_gridforge") && res["x_gridforge"].contains("marker_companions")) {
            for (const auto& [data_field, marker_field] :
                 res["x_gridforge"]["marker_companions"].items()) {
                std::string marker = marker_field.get<std::string>();
                if (!field_names.count(data_field))
                    issue("resource \"" + r.name + "\": marker companion for unknown field \"" +
                              data_field + "\"",
                          data_field);
                else if (!field_names.count(marker))
                    issue("resource \"" + r.name + "\": marker field \"" + marker +
                              "\" missing from schema",
                          marker);
                else
                    r.marker_companions[data_field] = marker;
            }
        }
        out.resources.push_back(std::move(r));
    }
    if (!doc.contains("x_gridforge") || !doc["x_gridforge"].is_object() ||
        !doc["x_gridforge"].contains("checksums") ||
        !doc["x_gridforge"]["checksums"].is_object()) {
        issue("descriptor lacks the checksums map");
    } else {
        for (const auto& [path, digest] : doc["x_gridforge"]["checksums"].items()) {
            if (digest.is_string())
                out.checksums[path] = digest.get<std::string>();
            else
                issue("checksum for \"" + path + "\" must be a string", path);
        }
    }
    return out;
}

void validate_resource_file(const fs::path& dir, const Resource& r,
                            std::vector<PackageIssue>& issues)
{
    auto issue = [&](std::string message, std::optional<std::size_t> row = {},
                     std::optional<std::string> column = {}) {
        issues.push_back({r.path, row, std::move(column), std::move(message)});
    };

    std::string bytes;
    try {
        bytes = read_file(dir / r.path);
    } catch (const IoError&) {
        issue("resource file missing");
        return;
    }
    std::vector<std::vector<std::string>> records;
    try {
        records = csv::parse(bytes, ',');
    } catch (const ParseError& e) {
        issue(e.what());
        return;
    }
    if (records.empty()) {
        issue("resource file has no header row");
        return;
    }
    const auto& header = records[0];
    for (std::size_t c = 0; c < std::max(header.size(), r.schema.size()); ++c) {
        std::string expected = c < r.schema.size() ? r.schema[c].name : "";
        std::string got = c < header.size() ? header[c] : "";
        if (expected != got) {
            issue("header mismatch at column " + std::to_string(c + 1) + ": expected \"" +
                      expected + "\", found \"" + got + "\"",
                  std::nullopt, expected.empty() ? got : expected);
            return;
        }
    }

    std::set<std::string> marker_fields;
    for (const auto& [data_field, marker_field] : r.marker_companions)
        marker_fields.insert(marker_field);

    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        const std::size_t row = i; // 1-based data row
        if (rec.size() != r.schema.size()) {
            issue("ragged row: expected " + std::to_string(r.schema.size()) +
                      " cells, found " + std::to_string(rec.size()),
                  row);
            continue;
        }
        for (std::size_t c = 0; c < rec.size(); ++c) {
            const FieldSchema& field = r.schema[c];
            const std::string& cell = rec[c];
            if (cell.empty())
                continue; // NA
            auto type_issue = [&](const std::string& what) {
                issue(what + ": \"" + cell + "\"", row, field.name);
            };
            std::optional<double> numeric;
            try {
                switch (field.type) {
                case FieldType::number:
                    numeric = parse_double_strict(cell);
                    break;
                case FieldType::integer:
                    numeric = static_cast<double>(parse_int_strict(cell));
                    break;
                case FieldType::boolean:
                    if (cell != "true" && cell != "false")
                        type_issue("not a boolean");
                    break;
                case FieldType::date:
                    Date::parse_iso(cell);
                    break;
                case FieldType::datetime:
                    UtcTime::parse_iso(cell);
                    break;
                case FieldType::string_type:
                    if (marker_fields.count(field.name))
                        MarkerSet::parse(cell); // closed marker vocabulary
                    break;
                }
            } catch (const ParseError& e) {
                type_issue(e.what());
                continue;
            }
            if (numeric) {
                if (field.constraints.minimum && *numeric < *field.constraints.minimum)
                    issue("value below minimum " + format_number(*field.constraints.minimum) +
                              ": \"" + cell + "\"",
                          row, field.name);
                if (field.constraints.maximum && *numeric > *field.constraints.maximum)
                    issue("value above maximum " + format_number(*field.constraints.maximum) +
                              ": \"" + cell + "\"",
                          row, field.name);
            }
            if (field.type == FieldType::string_type &&
                !field.constraints.enum_values.empty() &&
                std::find(field.constraints.enum_values.begin(),
                          field.constraints.enum_values.end(),
                          cell) == field.constraints.enum_values.end())
                issue("value outside enum: \"" + cell + "\"", row, field.name);
        }
    }
}

} // namespace

std::vector<PackageIssue> validate_package(const fs::path& dir)
{
    std::vector<PackageIssue> issues;
    fs::path descriptor_path = dir / descriptor_name;
    if (!fs::exists(descriptor_path)) {
        issues.push_back({descriptor_name, std::nullopt, std::nullopt,
                          "descriptor datapackage.json missing"});
        return issues;
    }
    json doc;
    try {
        doc = json::parse(read_file(descriptor_path));
    } catch (const json::parse_error& e) {
        issues.push_back({descriptor_name, std::nullopt, std::nullopt,
                          std::string("descriptor is not valid JSON: ") + e.what()});
        return issues;
    } catch (const IoError& e) {
        issues.push_back({descriptor_name, std::nullopt, std::nullopt, e.what()});
        return issues;
    }

    auto parsed = parse_descriptor(doc, issues);
    if (!parsed)
        return issues;

    for (const Resource& r : parsed->resources) {
        validate_resource_file(dir, r, issues);
        auto it = parsed->checksums.find(r.path);
        if (it == parsed->checksums.end()) {
            issues.push_back({r.path, std::nullopt, std::nullopt,
                              "no checksum recorded for resource"});
            continue;
        }
        try {
            std::string actual = sha256_hex(read_file(dir / r.path));
            if (actual != it->second)
                issues.push_back({r.path, std::nullopt, std::nullopt,
                                  "checksum mismatch: descriptor says " + it->second +
                                      ", file is " + actual});
        } catch (const IoError&) {
            // missing file already reported
        }
    }
    for (const auto& [path, digest] : parsed->checksums) {
        bool known = std::any_of(parsed->resources.begin(), parsed->resources.end(),
                                 [&](const Resource& r) { return r.path == path; });
        if (!known)
            issues.push_back({path, std::nullopt, std::nullopt,
                              "checksum recorded for unknown resource path"});
    }
    return issues;
}

// ---------------------------------------------------------------------------
// Versioning

StampResult version_stamp(const fs::path& dir, const std::string& version)
{
    if (version.empty())
        throw InvalidArgument("version must not be empty");
    auto issues = validate_package(dir);
    if (!issues.empty())
        throw InvalidArgument("cannot stamp an invalid package: " + issues.front().message);

    json doc = json::parse(read_file(dir / descriptor_name));
    std::string name = doc["name"].get<std::string>();

    std::map<std::string, std::string> checksums;
    for (const auto& [path, digest] : doc["x_gridforge"]["checksums"].items())
        checksums[path] = digest.get<std::string>();

    std::string manifest;
    for (const auto& [path, digest] : checksums)
        manifest += path + "," + digest + "\n";
    std::string content_id = sha256_hex(manifest);

    json ledger;
    fs::path ledger_path = dir / ledger_name;
    if (fs::exists(ledger_path))
        ledger = json::parse(read_file(ledger_path));
    else
        ledger = json{{"name", name}, {"versions", json::object()}};
    if (ledger["versions"].contains(version)) {
        std::string recorded = ledger["versions"][version].get<std::string>();
        if (recorded != content_id)
            throw InvalidArgument("version immutability violated: \"" + version +
                                  "\" is already stamped with different content");
        // Same bytes re-stamped: nothing to do.
        return StampResult{name + "/" + version, checksums};
    }
    ledger["versions"][version] = content_id;

    doc["version"] = version;
    doc["id"] = name + "/" + version;
    write_file(dir / descriptor_name, doc.dump(2) + "\n");
    write_file(dir / manifest_name, manifest);
    write_file(ledger_path, ledger.dump(2) + "\n");
    return StampResult{name + "/" + version, checksums};
}

void write_package(const fs::path& dir, const PackageMeta& meta,
                   const std::vector<std::pair<Resource, std::vector<Row>>>& resources)
{
    fs::create_directories(dir);
    std::map<std::string, std::string> checksums;
    std::vector<Resource> descriptors;
    for (const auto& [resource, rows] : resources) {
        std::string bytes = write_csv(resource, rows);
        fs::path target = dir / resource.path;
        if (target.has_parent_path())
            fs::create_directories(target.parent_path());
        write_file(target, bytes);
        checksums[resource.path] = sha256_hex(bytes);
        descriptors.push_back(resource);
    }
    write_file(dir / descriptor_name, build_descriptor(descriptors, meta, checksums));
}

} // namespace gridforge
