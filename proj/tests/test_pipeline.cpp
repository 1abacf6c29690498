// SPDX-License-Identifier: Apache-2.0
#include "gridforge/pipeline.hpp"

#include "gridforge/csv.hpp"
#include "gridforge/datapackage.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

using namespace gridforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path fixtures = GRIDFORGE_FIXTURE_DIR;
const fs::path repo_data = GRIDFORGE_DATA_DIR;

fs::path temp_dir(const std::string& tag)
{
    fs::path dir = fs::temp_directory_path() / ("gridforge_pl_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

fs::path write_config(const fs::path& dir, const json& doc)
{
    fs::path path = dir / "config.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    return path;
}

json timeseries_config(const fs::path& out_dir, json options)
{
    if (options.is_null())
        options = json{{"resolution_minutes", 15},
                       {"max_gap_minutes", 120},
                       {"aggregate_to_hourly", true},
                       {"unit", "MW"}};
    return json{{"package_name", "opsd_timeseries_test"},
                {"version", "2018-03-13"},
                {"sources",
                 {(fixtures / "src_de_load_a.json").string(),
                  (fixtures / "src_de_wind_b.json").string(),
                  (fixtures / "src_de_solar_c.json").string()}},
                {"pipeline", "timeseries"},
                {"options", options},
                {"output_dir", out_dir.string()}};
}

// Runs ingest + build for a config, returns the build exit code.
int ingest_and_build(const fs::path& work, const json& config_doc, EventLog log = EventLog{})
{
    fs::path config_path = write_config(work, config_doc);
    PipelineConfig config = PipelineConfig::load(config_path);
    REQUIRE(cmd_ingest(config, work / "cache", true, log) == exit_ok);
    return cmd_build(config, work / "cache", BuildFlags{true, false, 1}, log);
}

int run_cli(const std::string& args)
{
    std::string cmd = std::string(GRIDFORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config loading is strict")
{
    fs::path work = temp_dir("config");
    json doc = timeseries_config(work / "out", nullptr);

    SUBCASE("round trip")
    {
        PipelineConfig c = PipelineConfig::load(write_config(work, doc));
        CHECK(c.package_name == "opsd_timeseries_test");
        CHECK(c.source_paths.size() == 3);
        CHECK(c.pipeline == "timeseries");
    }
    SUBCASE("unknown keys are fatal")
    {
        doc["extra"] = 1;
        CHECK_THROWS_AS(PipelineConfig::load(write_config(work, doc)), ConfigError);
    }
    SUBCASE("unknown pipeline")
    {
        doc["pipeline"] = "alchemy";
        CHECK_THROWS_AS(PipelineConfig::load(write_config(work, doc)), ConfigError);
    }
    SUBCASE("missing descriptor file")
    {
        doc["sources"].push_back((fixtures / "missing.json").string());
        CHECK_THROWS_AS(PipelineConfig::load(write_config(work, doc)), ConfigError);
    }
}

TEST_CASE("cmd_ingest snapshots sources and is idempotent")
{
    fs::path work = temp_dir("ingest");
    json doc = timeseries_config(work / "out", nullptr);
    PipelineConfig config = PipelineConfig::load(write_config(work, doc));

    CHECK(cmd_ingest(config, work / "cache", true, EventLog{}) == exit_ok);
    SnapshotCache cache(work / "cache");
    CHECK(cache.entries().size() == 3);

    SUBCASE("repeat run adds nothing")
    {
        CHECK(cmd_ingest(config, work / "cache", true, EventLog{}) == exit_ok);
        SnapshotCache again(work / "cache");
        CHECK(again.entries().size() == 3);
    }
    SUBCASE("a missing origin fails the run but preserves the partial cache")
    {
        fs::path ghost = work / "src_ghost.json";
        std::ofstream out(ghost);
        out << R"({"id": "ghost", "origin": "does_not_exist.csv",
                   "dialect": {}, "column_map": [], "timezone": "UTC"})";
        out.close();
        json bad = doc;
        bad["sources"] = json::array({(fixtures / "src_de_load_a.json").string(),
                                      ghost.string(),
                                      (fixtures / "src_de_wind_b.json").string()});
        PipelineConfig partial = PipelineConfig::load(write_config(work, bad));
        fs::path cache2 = work / "cache2";
        CHECK(cmd_ingest(partial, cache2, true, EventLog{}) == exit_config_error);
        CHECK(SnapshotCache(cache2).entries().size() == 2);
    }
}

TEST_CASE("timeseries build produces one validated hourly resource")
{
    fs::path work = temp_dir("ts_build");
    fs::path out = work / "out";
    REQUIRE(ingest_and_build(work, timeseries_config(out, nullptr)) == exit_ok);

    CHECK(fs::exists(out / "datapackage.json"));
    CHECK(fs::exists(out / "time_series_60min.csv"));
    CHECK(fs::exists(out / "checksums.txt"));
    CHECK(validate_package(out).empty());

    auto records = csv::parse(slurp(out / "time_series_60min.csv"), ',');
    // union axis: 2017-10-28 22:00Z .. 2017-10-29 22:00Z hourly = 25 rows
    REQUIRE(records.size() == 26);
    CHECK(records[0][0] == "utc_timestamp");
    CHECK(records[1][0] == "2017-10-28T22:00:00Z");
    CHECK(records[25][0] == "2017-10-29T22:00:00Z");

    json descriptor = json::parse(slurp(out / "datapackage.json"));
    CHECK(descriptor["name"] == "opsd_timeseries_test");
    CHECK(descriptor["version"] == "2018-03-13");
    CHECK(descriptor["resources"][0]["name"] == "time_series_60min");

    // Golden lock: built once, every cell cross-checked against an
    // independent zoneinfo-based recomputation, then frozen.
    CHECK(sha256_hex(slurp(out / "time_series_60min.csv")) ==
          "7e8cf17b42d3d9de2f49a4de270525bad84ac2a40a876cf9a59b83f3733fc241");
    CHECK(sha256_hex(slurp(out / "datapackage.json")) ==
          "23f76738ac09be31d3c96c08ccfa9095027f7d27d47cb5a8ba2f9c599cc8712f");

    SUBCASE("DST fold leaves a strictly increasing complete hourly axis")
    {
        for (std::size_t r = 2; r < records.size(); ++r)
            CHECK(UtcTime::parse_iso(records[r - 1][0]) < UtcTime::parse_iso(records[r][0]));
    }
    SUBCASE("the 30-minute gap is interpolated and marked")
    {
        // de_load_a quarters 20..21 are NA; they sit in hour index 5
        std::size_t row = 1 + 5;
        std::size_t load_col = 1; // columns sorted: de_load_a first
        CHECK(records[0][load_col] == "de_load_a");
        CHECK(!records[row][load_col].empty());
        CHECK(records[row][load_col + 1] == "interpolated;own_calculation");
    }
    SUBCASE("the 135-minute gap stays NA")
    {
        // quarters 40..48 are NA: hours 10..12 have at least one NA quarter
        for (std::size_t h : {10, 11, 12})
            CHECK(records[1 + h][1].empty());
    }
    SUBCASE("solar and wind columns carry values")
    {
        CHECK(records[0][3] == "de_solar_c");
        CHECK(records[0][5] == "de_wind_b");
        CHECK(records[1][5] == "48.4"); // (40.0+45.7+51.3+56.6)/4, by hand
    }
}

TEST_CASE("timeseries build is deterministic and versions are immutable")
{
    fs::path work = temp_dir("ts_det");
    fs::path out_a = work / "out_a";
    fs::path out_b = work / "out_b";
    REQUIRE(ingest_and_build(work, timeseries_config(out_a, nullptr)) == exit_ok);

    {
        json doc = timeseries_config(out_b, nullptr);
        PipelineConfig config = PipelineConfig::load(write_config(work, doc));
        REQUIRE(cmd_build(config, work / "cache", BuildFlags{true, false, 1}, EventLog{}) ==
                exit_ok);
    }
    for (const char* name : {"datapackage.json", "time_series_60min.csv", "checksums.txt",
                             "versions.json"})
        CHECK(slurp(out_a / name) == slurp(out_b / name));

    SUBCASE("rebuilding identical bytes under the same version is fine")
    {
        json doc = timeseries_config(out_a, nullptr);
        PipelineConfig config = PipelineConfig::load(write_config(work, doc));
        CHECK(cmd_build(config, work / "cache", BuildFlags{true, false, 1}, EventLog{}) ==
              exit_ok);
    }
    SUBCASE("changed content under an unchanged version is rejected")
    {
        json doc = timeseries_config(out_a, nullptr);
        doc["options"]["max_gap_minutes"] = 0; // changes the resource bytes
        PipelineConfig config = PipelineConfig::load(write_config(work, doc));
        CHECK_THROWS_AS(
            cmd_build(config, work / "cache", BuildFlags{true, false, 1}, EventLog{}),
            InvalidArgument);
    }
    SUBCASE("parallel jobs produce the identical package")
    {
        fs::path out_c = work / "out_c";
        json doc = timeseries_config(out_c, nullptr);
        PipelineConfig config = PipelineConfig::load(write_config(work, doc));
        REQUIRE(cmd_build(config, work / "cache", BuildFlags{true, false, 4}, EventLog{}) ==
                exit_ok);
        CHECK(slurp(out_a / "time_series_60min.csv") == slurp(out_c / "time_series_60min.csv"));
    }
}

TEST_CASE("max_gap zero disables interpolation markers")
{
    fs::path work = temp_dir("ts_nogap");
    fs::path out = work / "out";
    json options = {{"resolution_minutes", 15},
                    {"max_gap_minutes", 0},
                    {"aggregate_to_hourly", true},
                    {"unit", "MW"}};
    REQUIRE(ingest_and_build(work, timeseries_config(out, options)) == exit_ok);
    CHECK(slurp(out / "time_series_60min.csv").find("interpolated") == std::string::npos);
}

TEST_CASE("capacity profiles join the hourly resource")
{
    fs::path work = temp_dir("ts_profile");
    fs::path out = work / "out";
    json doc = {{"package_name", "profile_test"},
                {"version", "2018-03-13"},
                {"sources",
                 {(fixtures / "src_de_wind_b.json").string(),
                  (fixtures / "src_de_res.json").string()}},
                {"pipeline", "timeseries"},
                {"options",
                 {{"resolution_minutes", 15},
                  {"max_gap_minutes", 120},
                  {"aggregate_to_hourly", true},
                  {"unit", "MW"},
                  {"country", "DE"},
                  {"taxonomy", (repo_data / "taxonomy.json").string()},
                  {"vocab",
                   {{"de_energy_sources",
                     (repo_data / "vocab/de_energy_sources.json").string()}}},
                  {"profiles", json::array({{{"series", "de_wind_b"},
                                             {"plants", "de_res"},
                                             {"grouping", "wind"}}})}}},
                {"output_dir", out.string()}};
    REQUIRE(ingest_and_build(work, doc) == exit_ok);
    CHECK(validate_package(out).empty());

    auto records = csv::parse(slurp(out / "time_series_60min.csv"), ',');
    REQUIRE(records[0].size() == 5); // timestamp + value/marker + profile/marker
    CHECK(records[0][3] == "de_wind_b_profile");

    // fleet in the wind subtree: 60.0 + 21.5 MW commissioned long before
    double value = parse_double_strict(records[1][1]);
    double profile = parse_double_strict(records[1][3]);
    CHECK(std::abs(profile - value / 81.5) <= 1e-12);
    CHECK(records[1][4].find("own_calculation") != std::string::npos);
}

TEST_CASE("plants build merges, dedupes and flags")
{
    fs::path work = temp_dir("plants");
    fs::path out = work / "out";
    json doc = {{"package_name", "plants_test"},
                {"version", "2018-03-13"},
                {"sources",
                 {(fixtures / "src_de_bnetza.json").string(),
                  (fixtures / "src_de_uba.json").string(),
                  (fixtures / "src_de_res.json").string()}},
                {"pipeline", "plants"},
                {"options",
                 {{"country", "DE"},
                  {"taxonomy", (repo_data / "taxonomy.json").string()},
                  {"vocab",
                   {{"de_energy_sources",
                     (repo_data / "vocab/de_energy_sources.json").string()}}},
                  {"primary", "de_bnetza"},
                  {"secondary", "de_uba"},
                  {"renewables", json::array({"de_res"})},
                  {"match_tolerance", 0.05},
                  {"rules", json::array(
                                {{{"id", "rooftop_solar_max_1mw"},
                                  {"field", "capacity_net_mw"},
                                  {"max", 1.0},
                                  {"node", "solar_rooftop"}},
                                 {{"id", "capacity_non_negative"},
                                  {"field", "capacity_net_mw"},
                                  {"min", 0.0}}})}}},
                {"output_dir", out.string()}};
    REQUIRE(ingest_and_build(work, doc) == exit_ok);
    CHECK(validate_package(out).empty());

    auto conv = csv::parse(slurp(out / "conventional_power_plants.csv"), ',');
    auto ren = csv::parse(slurp(out / "renewable_power_plants.csv"), ',');

    auto find_row = [](const std::vector<std::vector<std::string>>& t,
                       const std::string& id) -> const std::vector<std::string>* {
        for (std::size_t r = 1; r < t.size(); ++r)
            if (t[r][0] == id)
                return &t[r];
        return nullptr;
    };

    SUBCASE("merged record fills CHP and gross capacity from the secondary")
    {
        const auto* row = find_row(conv, "BNA0001");
        REQUIRE(row);
        CHECK((*row)[5] == "510.0");  // net from primary
        CHECK((*row)[6] == "540.0");  // gross filled from secondary
        CHECK((*row)[7] == "true");   // chp filled from secondary
        CHECK((*row)[16].find("capacity_gross_mw=de_uba") != std::string::npos);
        CHECK(find_row(conv, "UBA_X1") == nullptr); // fused away
        CHECK(find_row(conv, "UBA_X9") != nullptr); // secondary-only passthrough
    }
    SUBCASE("misplaced units moved across the domain split")
    {
        CHECK(find_row(conv, "BNA0005") == nullptr); // run-of-river left
        CHECK(find_row(ren, "BNA0005") != nullptr);
        CHECK(find_row(ren, "RES004") == nullptr); // pumped storage left
        CHECK(find_row(conv, "RES004") != nullptr);
    }
    SUBCASE("cross-list duplicate flagged in both, never deleted")
    {
        const auto* a = find_row(conv, "BNA0004");
        const auto* b = find_row(conv, "RES004");
        REQUIRE(a);
        REQUIRE(b);
        CHECK((*a)[18].find("implausible") != std::string::npos);
        CHECK((*b)[18].find("implausible") != std::string::npos);
    }
    SUBCASE("GW-scale rooftop solar flagged, value untouched")
    {
        const auto* row = find_row(ren, "RES003");
        REQUIRE(row);
        CHECK((*row)[5] == "2000.0");
        CHECK((*row)[17].find("rooftop_solar_max_1mw") != std::string::npos);
        CHECK((*row)[18].find("implausible") != std::string::npos);
    }
    SUBCASE("reports are written next to the resources")
    {
        CHECK(fs::exists(out / "reports/match_report.json"));
        json report = json::parse(slurp(out / "reports/match_report.json"));
        CHECK(report["matched"].size() == 2); // BNA0001+UBA_X1, BNA0002+UBA_X2
    }
}

TEST_CASE("capacity build pivots sources into adjacent columns")
{
    fs::path work = temp_dir("capacity");
    fs::path out = work / "out";
    json doc = {{"package_name", "capacity_test"},
                {"version", "2018-03-13"},
                {"sources",
                 {(fixtures / "src_cap_int_stats.json").string(),
                  (fixtures / "src_cap_national.json").string()}},
                {"pipeline", "capacity"},
                {"options",
                 {{"taxonomy", (repo_data / "taxonomy.json").string()},
                  {"vocab",
                   {{"de_energy_sources",
                     (repo_data / "vocab/de_energy_sources.json").string()}}},
                  {"unit_factors", {{"cap_national", 0.001}}}}},
                {"output_dir", out.string()}};
    REQUIRE(ingest_and_build(work, doc) == exit_ok);
    CHECK(validate_package(out).empty());

    auto records = csv::parse(slurp(out / "national_generation_capacity.csv"), ',');
    REQUIRE(records[0] ==
            std::vector<std::string>{"country", "year", "energy_source", "cap_int_stats",
                                     "cap_int_stats_incomplete", "cap_national",
                                     "cap_national_incomplete"});
    auto find_row = [&](const std::string& country,
                        const std::string& node) -> const std::vector<std::string>* {
        for (std::size_t r = 1; r < records.size(); ++r)
            if (records[r][0] == country && records[r][2] == node)
                return &records[r];
        return nullptr;
    };

    SUBCASE("unit conversion from MW sources")
    {
        const auto* row = find_row("FR", "nuclear");
        REQUIRE(row);
        CHECK((*row)[3] == "63.0");
        CHECK((*row)[5] == "63.25");
    }
    SUBCASE("zero is zero and NA is empty, end to end")
    {
        const auto* de_solar = find_row("DE", "solar");
        REQUIRE(de_solar);
        CHECK((*de_solar)[3] == "0.0"); // reported zero
        CHECK((*de_solar)[5] == "");    // never reported

        const auto* fr_solar = find_row("FR", "solar");
        REQUIRE(fr_solar);
        CHECK((*fr_solar)[3] == "6.5");
        CHECK((*fr_solar)[5] == ""); // the explicit NA cell stayed NA
    }
}

TEST_CASE("weather build derives speeds and flattens the grid")
{
    fs::path work = temp_dir("weather");
    fs::path out = work / "out";
    json doc = {{"package_name", "weather_test"},
                {"version", "2018-03-13"},
                {"sources", {(fixtures / "src_weather_de.json").string()}},
                {"pipeline", "weather"},
                {"options", {{"derive_wind_speed", true}}},
                {"output_dir", out.string()}};
    REQUIRE(ingest_and_build(work, doc) == exit_ok);
    CHECK(validate_package(out).empty());

    auto records = csv::parse(slurp(out / "weather_data.csv"), ',');
    REQUIRE(records.size() == 1 + 2 * 6); // 2 times x 3x2 grid
    CHECK(records[0] == std::vector<std::string>{"utc_timestamp", "lat", "lon",
                                                 "wind_speed_50m", "temperature"});
    // first row: lat descending => 50.5, lon 10.0 => grid index j=1,i=0
    CHECK(records[1][1] == "50.5");
    CHECK(records[1][3] == "2.9154759474226504"); // hypot(2.5, -1.5)
    // the NA component propagates: cell j=0,i=2 is row 6 at t0
    CHECK(records[6][3] == "");
    CHECK(records[6][4] == "277.5");

    SUBCASE("bounding box subsetting")
    {
        fs::path out2 = work / "out2";
        json doc2 = doc;
        doc2["package_name"] = "weather_sub";
        doc2["options"]["bounding_box"] = {{"ne", {50.6, 10.7}}, {"sw", {50.4, 10.0}}};
        doc2["output_dir"] = out2.string();
        PipelineConfig config = PipelineConfig::load(write_config(work, doc2));
        REQUIRE(cmd_build(config, work / "cache", BuildFlags{true, false, 1}, EventLog{}) ==
                exit_ok);
        auto sub = csv::parse(slurp(out2 / "weather_data.csv"), ',');
        CHECK(sub.size() == 1 + 2 * 2); // 2 times x 1x2 cells
    }
}

TEST_CASE("the CLI maps outcomes onto the stable exit-code contract")
{
    fs::path work = temp_dir("cli");
    fs::path out = work / "out";
    fs::path config_path = write_config(work, timeseries_config(out, nullptr));
    fs::path cache = work / "cache";

    CHECK(run_cli("ingest --config " + config_path.string() + " --cache " + cache.string() +
                  " --offline") == 0);
    CHECK(run_cli("build --config " + config_path.string() + " --cache " + cache.string() +
                  " --offline") == 0);
    CHECK(run_cli("validate " + out.string()) == 0);

    SUBCASE("mutated header exits 1 and names the column")
    {
        std::string bytes = slurp(out / "time_series_60min.csv");
        bytes.replace(bytes.find("de_load_a"), 9, "de_LOAD_a");
        std::ofstream f(out / "time_series_60min.csv", std::ios::binary | std::ios::trunc);
        f << bytes;
        f.close();
        CHECK(run_cli("validate " + out.string()) == 1);
    }
    SUBCASE("missing descriptor exits 2")
    {
        CHECK(run_cli("validate " + (work / "nowhere").string()) == 2);
    }
    SUBCASE("diff of identical packages is empty")
    {
        fs::path out_b = work / "out_b";
        json doc = timeseries_config(out_b, nullptr);
        fs::path config_b = work / "config_b.json";
        {
            std::ofstream f(config_b, std::ios::binary);
            f << doc.dump(2) << '\n';
        }
        REQUIRE(run_cli("build --config " + config_b.string() + " --cache " +
                        cache.string() + " --offline") == 0);

        std::ostringstream diff_out;
        CHECK(cmd_diff(out, out_b, diff_out) == 0);
        json report = json::parse(diff_out.str());
        CHECK(report["resources"][0]["status"] == "unchanged");
        CHECK(report["resources"][0]["cells_changed"] == 0);

        SUBCASE("one changed cell is located")
        {
            std::string bytes = slurp(out_b / "time_series_60min.csv");
            std::size_t at = bytes.find("48.4");
            bytes.replace(at, 4, "49.4");
            {
                std::ofstream f(out_b / "time_series_60min.csv",
                                std::ios::binary | std::ios::trunc);
                f << bytes;
            }
            // keep the package valid: fix the checksum
            json desc = json::parse(slurp(out_b / "datapackage.json"));
            desc["x_gridforge"]["checksums"]["time_series_60min.csv"] =
                sha256_hex(slurp(out_b / "time_series_60min.csv"));
            {
                std::ofstream f(out_b / "datapackage.json",
                                std::ios::binary | std::ios::trunc);
                f << desc.dump(2) << '\n';
            }
            std::ostringstream changed_out;
            CHECK(cmd_diff(out, out_b, changed_out) == 0);
            json changed = json::parse(changed_out.str());
            CHECK(changed["resources"][0]["cells_changed"] == 1);
            CHECK(changed["resources"][0]["changes"][0]["column"] == "de_wind_b");
        }
    }
    SUBCASE("concurrent builds on one output directory are rejected")
    {
        fs::create_directories(out / ".gridforge.lock");
        PipelineConfig config = PipelineConfig::load(config_path);
        CHECK_THROWS_AS(cmd_build(config, cache, BuildFlags{true, false, 1}, EventLog{}),
                        ConfigError);
        fs::remove(out / ".gridforge.lock");
    }
}

TEST_CASE("unmapped terms fail hard unless routed explicitly")
{
    fs::path work = temp_dir("unmapped");
    fs::path out = work / "out";
    // a plants source with an unmapped term
    {
        std::ofstream f(work / "odd.csv", std::ios::binary);
        f << "id;n;e;mw\nX1;Plant;Unobtainium;5,0\n";
        std::ofstream d(work / "src_odd.json", std::ios::binary);
        d << json{{"id", "odd"},
                  {"origin", "odd.csv"},
                  {"dialect",
                   {{"delimiter", ";"}, {"decimal_separator", ","}, {"header_rows", 1}}},
                  {"column_map",
                   json::array({json::array({"id", "record_id"}), json::array({"n", "name"}),
                                json::array({"e", "energy_source"}),
                                json::array({"mw", "capacity_net_mw"})})},
                  {"vocab_map_id", "de_energy_sources"},
                  {"timezone", "UTC"}}
                 .dump(2);
    }
    json doc = {{"package_name", "unmapped_test"},
                {"version", "2018-03-13"},
                {"sources", {(work / "src_odd.json").string()}},
                {"pipeline", "plants"},
                {"options",
                 {{"country", "DE"},
                  {"taxonomy", (repo_data / "taxonomy.json").string()},
                  {"vocab",
                   {{"de_energy_sources",
                     (repo_data / "vocab/de_energy_sources.json").string()}}},
                  {"primary", "odd"}}},
                {"output_dir", out.string()}};
    fs::path config_path = write_config(work, doc);
    PipelineConfig config = PipelineConfig::load(config_path);
    REQUIRE(cmd_ingest(config, work / "cache", true, EventLog{}) == exit_ok);

    CHECK_THROWS_AS(cmd_build(config, work / "cache", BuildFlags{true, false, 1}, EventLog{}),
                    UnmappedTermError);

    BuildFlags allow;
    allow.offline = true;
    allow.allow_unmapped = true;
    CHECK(cmd_build(config, work / "cache", allow, EventLog{}) == exit_ok);
    auto records = csv::parse(slurp(out / "conventional_power_plants.csv"), ',');
    bool routed = false;
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r][3] == "other_or_unspecified" &&
            records[r][18].find("own_calculation") != std::string::npos)
            routed = true;
    CHECK(routed);
}
