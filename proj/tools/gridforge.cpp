// SPDX-License-Identifier: Apache-2.0
#include "gridforge/pipeline.hpp"

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"gridforge - harmonised power system data packages"};
    app.require_subcommand(1);

    std::string config_path;
    std::string cache_dir = "cache";
    if (const char* env = std::getenv("GRIDFORGE_CACHE"); env && *env)
        cache_dir = env;
    bool offline = false;
    int jobs = 1;
    bool allow_unmapped = false;
    std::string package_dir, dir_a, dir_b;

    auto* ingest = app.add_subcommand("ingest", "Snapshot raw sources into the cache");
    ingest->add_option("--config", config_path, "Pipeline config file")->required();
    ingest->add_option("--cache", cache_dir, "Snapshot cache directory");
    ingest->add_flag("--offline", offline, "Never fetch over the network");

    auto* build = app.add_subcommand("build", "Build a data package from cached sources");
    build->add_option("--config", config_path, "Pipeline config file")->required();
    build->add_option("--cache", cache_dir, "Snapshot cache directory");
    build->add_flag("--offline", offline, "Never fetch over the network");
    build->add_option("--jobs", jobs, "Process sources in parallel when > 1");
    build->add_flag("--allow-unmapped", allow_unmapped,
                    "Route unmapped terms to other_or_unspecified instead of failing");

    auto* validate = app.add_subcommand("validate", "Validate a package directory");
    validate->add_option("dir", package_dir, "Package directory")->required();

    auto* diff = app.add_subcommand("diff", "Compare two package directories");
    diff->add_option("dir_a", dir_a, "First package")->required();
    diff->add_option("dir_b", dir_b, "Second package")->required();

    CLI11_PARSE(app, argc, argv);

    gridforge::EventLog log(&std::clog);
    try {
        if (ingest->parsed()) {
            auto config = gridforge::PipelineConfig::load(config_path);
            return gridforge::cmd_ingest(config, cache_dir, offline, log);
        }
        if (build->parsed()) {
            auto config = gridforge::PipelineConfig::load(config_path);
            gridforge::BuildFlags flags;
            flags.offline = offline;
            flags.jobs = jobs;
            flags.allow_unmapped = allow_unmapped;
            int code = gridforge::cmd_build(config, cache_dir, flags, log);
            if (code == gridforge::exit_ok)
                std::cout << "built " << config.package_name << "/" << config.version
                          << " in " << config.resolve(config.output_dir).string() << '\n';
            return code;
        }
        if (validate->parsed())
            return gridforge::cmd_validate(package_dir, std::cout);
        if (diff->parsed())
            return gridforge::cmd_diff(dir_a, dir_b, std::cout);
    } catch (const gridforge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return gridforge::exit_config_error;
    } catch (const gridforge::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return gridforge::exit_config_error;
    } catch (const gridforge::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return gridforge::exit_data_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return gridforge::exit_data_error;
    }
    return gridforge::exit_config_error;
}
