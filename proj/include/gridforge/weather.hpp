// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gridforge {

/// Regular lon/lat grid; the origin is the southwestern cell center.
/// Defaults follow the 0.625° x 0.5° reanalysis grid.
struct GridSpec {
    double lon0 = 0.0;
    double lat0 = 0.0;
    double dlon = 0.625;
    double dlat = 0.5;
    int nx = 1;
    int ny = 1;

    void validate() const; // throws ConfigError
    double lon_at(int i) const { return lon0 + i * dlon; }
    double lat_at(int j) const { return lat0 + j * dlat; }

    bool operator==(const GridSpec&) const = default;
};

enum class WeatherParameter {
    wind_u_2m,
    wind_v_2m,
    wind_speed_2m,
    wind_u_10m,
    wind_v_10m,
    wind_speed_10m,
    wind_u_50m,
    wind_v_50m,
    wind_speed_50m,
    roughness_length,
    solar_radiation,
    temperature,
    air_density,
    pressure,
};

std::string to_string(WeatherParameter p);
WeatherParameter weather_parameter_from_string(std::string_view s); // throws ConfigError
std::string unit_of(WeatherParameter p);

/// One parameter at one instant over the full grid; values run row-major
/// with latitude ascending (index = j * nx + i).
struct GridField {
    WeatherParameter parameter = WeatherParameter::temperature;
    UtcTime time;
    std::vector<std::optional<double>> values;
};

struct BoundingBox {
    double ne_lat = 0.0;
    double ne_lon = 0.0;
    double sw_lat = 0.0;
    double sw_lon = 0.0;

    void validate() const; // throws ConfigError
};

struct SubsetResult {
    GridField field;
    GridSpec spec;
};

/// Keeps exactly the cells whose centers lie inside the closed box.
SubsetResult subset(const GridField& field, const GridSpec& spec, const BoundingBox& box);

/// Elementwise magnitude of the horizontal wind vector at one height.
GridField wind_speed(const GridField& u, const GridField& v);

/// Tabular rendering: one row per (time, cell), one column per parameter.
/// Rows are time-major, then latitude descending, then longitude ascending.
struct FlatTable {
    std::vector<std::string> columns; // utc_timestamp, lat, lon, parameters...
    struct Row {
        UtcTime time;
        double lat = 0.0;
        double lon = 0.0;
        std::vector<std::optional<double>> values; // one per parameter column
    };
    std::vector<Row> rows;
};

FlatTable flatten_to_table(const std::vector<GridField>& fields, const GridSpec& spec);

/// The documented gridded input container: a JSON header with the grid and
/// per-field value blocks.
struct WeatherContainer {
    GridSpec grid;
    std::vector<GridField> fields;

    static WeatherContainer from_json(const nlohmann::json& doc);
    static WeatherContainer load(const std::filesystem::path& path);
};

} // namespace gridforge
