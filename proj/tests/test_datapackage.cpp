// SPDX-License-Identifier: Apache-2.0
#include "gridforge/datapackage.hpp"

#include "gridforge/csv.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

using namespace gridforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag)
{
    fs::path dir = fs::temp_directory_path() / ("gridforge_dp_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Resource sample_resource()
{
    Resource r;
    r.name = "load";
    r.path = "load.csv";
    r.schema = {
        {"utc_timestamp", FieldType::datetime, "Interval start", std::nullopt, {}},
        {"de_load", FieldType::number, "Load", std::string("MW"), {}},
        {"de_load_marker", FieldType::string_type, "", std::nullopt, {}},
        {"note", FieldType::string_type, "", std::nullopt, {}},
    };
    r.marker_companions["de_load"] = "de_load_marker";
    return r;
}

std::vector<Row> sample_rows()
{
    return {
        {UtcTime::from_civil(2017, 1, 1, 0), 0.0, MarkerSet{}, std::string("plain")},
        {UtcTime::from_civil(2017, 1, 1, 1), std::monostate{}, MarkerSet{}, std::monostate{}},
        {UtcTime::from_civil(2017, 1, 1, 2), 1234.5,
         MarkerSet{MarkerFlag::own_calculation, MarkerFlag::interpolated},
         std::string("a,comma")},
    };
}

PackageMeta sample_meta()
{
    PackageMeta meta;
    meta.name = "test_package";
    meta.version = "2018-03-13";
    meta.created = UtcTime::from_civil(2018, 3, 13);
    meta.sources = {{"src_a", "fixtures/a.csv"}};
    meta.contributors = {"Test Person"};
    return meta;
}

fs::path write_sample_package(const std::string& tag)
{
    fs::path dir = temp_dir(tag);
    write_package(dir, sample_meta(), {{sample_resource(), sample_rows()}});
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

} // namespace

TEST_CASE("write_csv renders the canonical contract")
{
    std::string bytes = write_csv(sample_resource(), sample_rows());
    auto records = csv::parse(bytes, ',');
    REQUIRE(records.size() == 4);
    CHECK(records[0] ==
          std::vector<std::string>{"utc_timestamp", "de_load", "de_load_marker", "note"});

    // zero renders as "0.0", NA as the empty field
    CHECK(records[1][1] == "0.0");
    CHECK(records[2][1] == "");
    CHECK(records[1][0] == "2017-01-01T00:00:00Z");

    // marker sets join sorted
    CHECK(records[3][2] == "interpolated;own_calculation");

    // commas force quotes
    CHECK(bytes.find("\"a,comma\"") != std::string::npos);
    CHECK(records[3][3] == "a,comma");

    SUBCASE("byte-identical across runs")
    {
        CHECK(write_csv(sample_resource(), sample_rows()) == bytes);
    }
    SUBCASE("type mismatches are reported with row and column")
    {
        auto rows = sample_rows();
        rows[1][1] = std::string("oops");
        try {
            write_csv(sample_resource(), rows);
            FAIL("expected InvalidArgument");
        } catch (const InvalidArgument& e) {
            std::string msg = e.what();
            CHECK(msg.find("row 2") != std::string::npos);
            CHECK(msg.find("de_load") != std::string::npos);
        }
    }
    SUBCASE("round trip preserves values, NA and markers")
    {
        auto records2 = csv::parse(write_csv(sample_resource(), sample_rows()), ',');
        CHECK(parse_double_strict(records2[1][1]) == 0.0);
        CHECK(records2[2][1].empty());
        CHECK(MarkerSet::parse(records2[3][2]) ==
              MarkerSet{MarkerFlag::own_calculation, MarkerFlag::interpolated});
        CHECK(UtcTime::parse_iso(records2[1][0]) == UtcTime::from_civil(2017, 1, 1, 0));
    }
}

TEST_CASE("build_descriptor is canonical and validating")
{
    std::map<std::string, std::string> checksums{{"load.csv", sha256_hex("x")}};
    std::string a = build_descriptor({sample_resource()}, sample_meta(), checksums);
    std::string b = build_descriptor({sample_resource()}, sample_meta(), checksums);
    CHECK(a == b);
    CHECK(a.back() == '\n');

    json doc = json::parse(a);
    CHECK(doc["profile"] == "tabular-data-package");
    CHECK(doc["resources"][0]["schema"]["fields"].size() == 4);
    CHECK(doc["resources"][0]["schema"]["fields"][1]["unit"] == "MW");
    CHECK(doc["x_gridforge"]["checksums"]["load.csv"] == sha256_hex("x"));

    SUBCASE("empty resource list is rejected")
    {
        CHECK_THROWS_WITH_AS(build_descriptor({}, sample_meta(), {}),
                             "package must contain at least one resource", InvalidArgument);
    }
    SUBCASE("duplicate resource names are rejected")
    {
        CHECK_THROWS_AS(
            build_descriptor({sample_resource(), sample_resource()}, sample_meta(), {}),
            InvalidArgument);
    }
    SUBCASE("marker companions must exist in the schema")
    {
        Resource r = sample_resource();
        r.marker_companions["de_load"] = "ghost_column";
        CHECK_THROWS_AS(build_descriptor({r}, sample_meta(), {}), ConfigError);
    }
}

TEST_CASE("validate_package accepts freshly written packages")
{
    fs::path dir = write_sample_package("golden");
    CHECK(validate_package(dir).empty());
}

TEST_CASE("validate_package localizes corruption")
{
    SUBCASE("renamed header column")
    {
        fs::path dir = write_sample_package("mut_header");
        std::string csv_bytes = slurp(dir / "load.csv");
        csv_bytes.replace(csv_bytes.find("de_load"), 7, "de_LOAD");
        spit(dir / "load.csv", csv_bytes);
        auto issues = validate_package(dir);
        REQUIRE(!issues.empty());
        bool header_issue = false;
        for (const auto& i : issues)
            if (i.message.find("header mismatch at column 2") != std::string::npos)
                header_issue = true;
        CHECK(header_issue);
    }
    SUBCASE("number cell corrupted to text")
    {
        fs::path dir = write_sample_package("mut_type");
        std::string csv_bytes = slurp(dir / "load.csv");
        csv_bytes.replace(csv_bytes.find("1234.5"), 6, "abcdef");
        spit(dir / "load.csv", csv_bytes);
        // keep the checksum in sync so only the type violation fires
        json doc = json::parse(slurp(dir / "datapackage.json"));
        doc["x_gridforge"]["checksums"]["load.csv"] = sha256_hex(slurp(dir / "load.csv"));
        spit(dir / "datapackage.json", doc.dump(2) + "\n");

        auto issues = validate_package(dir);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "load.csv");
        CHECK(issues[0].row == 3);
        CHECK(issues[0].column == "de_load");
    }
    SUBCASE("checksum edit")
    {
        fs::path dir = write_sample_package("mut_checksum");
        json doc = json::parse(slurp(dir / "datapackage.json"));
        doc["x_gridforge"]["checksums"]["load.csv"] = std::string(64, '0');
        spit(dir / "datapackage.json", doc.dump(2) + "\n");
        auto issues = validate_package(dir);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message.find("checksum mismatch") != std::string::npos);
    }
    SUBCASE("marker vocabulary violation")
    {
        fs::path dir = write_sample_package("mut_marker");
        std::string csv_bytes = slurp(dir / "load.csv");
        csv_bytes.replace(csv_bytes.find("interpolated;own_calculation"), 28,
                          "interpolated;made_up_flag___");
        spit(dir / "load.csv", csv_bytes);
        json doc = json::parse(slurp(dir / "datapackage.json"));
        doc["x_gridforge"]["checksums"]["load.csv"] = sha256_hex(slurp(dir / "load.csv"));
        spit(dir / "datapackage.json", doc.dump(2) + "\n");

        auto issues = validate_package(dir);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].column == "de_load_marker");
        CHECK(issues[0].message.find("unknown marker flag") != std::string::npos);
    }
    SUBCASE("missing descriptor")
    {
        fs::path dir = temp_dir("mut_missing");
        auto issues = validate_package(dir);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message.find("missing") != std::string::npos);
    }
    SUBCASE("missing resource file")
    {
        fs::path dir = write_sample_package("mut_missing_res");
        fs::remove(dir / "load.csv");
        auto issues = validate_package(dir);
        CHECK(!issues.empty());
    }
    SUBCASE("constraint violation")
    {
        fs::path dir = temp_dir("mut_constraint");
        Resource r = sample_resource();
        r.schema[1].constraints.minimum = 0.0;
        std::vector<Row> rows = sample_rows();
        rows[0][1] = -5.0;
        write_package(dir, sample_meta(), {{r, rows}});
        auto issues = validate_package(dir);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message.find("below minimum") != std::string::npos);
    }
}

TEST_CASE("version_stamp pins write-once versions")
{
    fs::path dir = write_sample_package("stamp");
    StampResult stamp = version_stamp(dir, "2018-03-13");
    CHECK(stamp.stable_id == "test_package/2018-03-13");
    CHECK(fs::exists(dir / "checksums.txt"));
    CHECK(fs::exists(dir / "versions.json"));

    std::string manifest = slurp(dir / "checksums.txt");
    CHECK(manifest.find("load.csv,") == 0);

    json doc = json::parse(slurp(dir / "datapackage.json"));
    CHECK(doc["version"] == "2018-03-13");
    CHECK(doc["id"] == "test_package/2018-03-13");

    SUBCASE("restamping the same bytes is a no-op success")
    {
        StampResult again = version_stamp(dir, "2018-03-13");
        CHECK(again.stable_id == stamp.stable_id);
    }
    SUBCASE("restamping changed bytes is an immutability violation")
    {
        // a different build output under the same version
        std::vector<Row> rows = sample_rows();
        rows[0][3] = std::string("changed");
        write_package(dir, sample_meta(), {{sample_resource(), rows}});
        CHECK_THROWS_AS(version_stamp(dir, "2018-03-13"), InvalidArgument);
    }
    SUBCASE("a new version stamps alongside the old one")
    {
        std::vector<Row> rows = sample_rows();
        rows[0][3] = std::string("changed");
        PackageMeta meta = sample_meta();
        meta.version = "2018-04-01";
        write_package(dir, meta, {{sample_resource(), rows}});
        StampResult next = version_stamp(dir, "2018-04-01");
        CHECK(next.stable_id == "test_package/2018-04-01");
        json ledger = json::parse(slurp(dir / "versions.json"));
        CHECK(ledger["versions"].size() == 2);
    }
    SUBCASE("stamping an invalid package fails")
    {
        fs::remove(dir / "load.csv");
        CHECK_THROWS_AS(version_stamp(dir, "2019-01-01"), InvalidArgument);
    }
}

TEST_CASE("package build-validate closure holds for generated content")
{
    fs::path dir = temp_dir("closure");
    Resource r = sample_resource();
    std::vector<Row> rows;
    for (int i = 0; i < 200; ++i) {
        MarkerSet m;
        if (i % 3 == 0)
            m.add(MarkerFlag::interpolated);
        if (i % 7 == 0)
            m.add(MarkerFlag::implausible);
        rows.push_back({UtcTime{static_cast<std::int64_t>(i) * 3600},
                        i % 5 == 0 ? CellValue(std::monostate{})
                                   : CellValue(static_cast<double>(i) * 1.25),
                        m, std::string("r" + std::to_string(i))});
    }
    write_package(dir, sample_meta(), {{r, rows}});
    CHECK(validate_package(dir).empty());
}
