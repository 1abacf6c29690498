// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"
#include "gridforge/datapackage.hpp"
#include "gridforge/sources.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gridforge {

/// One build: which sources feed which pipeline and where the package goes.
/// Relative paths resolve against the config file's directory.
struct PipelineConfig {
    std::string package_name;
    std::string version;
    std::optional<UtcTime> created;
    std::vector<std::filesystem::path> source_paths; // descriptor files
    std::string pipeline; // timeseries | plants | capacity | weather
    nlohmann::json options = nlohmann::json::object();
    std::filesystem::path output_dir;
    std::filesystem::path base_dir;

    static PipelineConfig load(const std::filesystem::path& path);
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Machine-auditable build log: one JSON object per event.
class EventLog {
public:
    explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
    void emit(std::string_view event, nlohmann::json fields = nlohmann::json::object()) const;

private:
    std::ostream* out_;
};

// Exit codes shared by all commands: 0 success, 1 validation or data error,
// 2 environment or configuration error.
inline constexpr int exit_ok = 0;
inline constexpr int exit_data_error = 1;
inline constexpr int exit_config_error = 2;

int cmd_ingest(const PipelineConfig& config, const std::filesystem::path& cache_dir,
               bool offline, const EventLog& log);

struct BuildFlags {
    bool offline = false;
    bool allow_unmapped = false; // route unmapped terms to other_or_unspecified
    int jobs = 1;
};

int cmd_build(const PipelineConfig& config, const std::filesystem::path& cache_dir,
              const BuildFlags& flags, const EventLog& log);

int cmd_validate(const std::filesystem::path& package_dir, std::ostream& out);

int cmd_diff(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
             std::ostream& out);

} // namespace gridforge
