// SPDX-License-Identifier: Apache-2.0
#include "gridforge/weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace gridforge {

namespace {

struct ParameterInfo {
    WeatherParameter parameter;
    const char* name;
    const char* unit;
};

const ParameterInfo parameter_table[] = {
    {WeatherParameter::wind_u_2m, "wind_u_2m", "m/s"},
    {WeatherParameter::wind_v_2m, "wind_v_2m", "m/s"},
    {WeatherParameter::wind_speed_2m, "wind_speed_2m", "m/s"},
    {WeatherParameter::wind_u_10m, "wind_u_10m", "m/s"},
    {WeatherParameter::wind_v_10m, "wind_v_10m", "m/s"},
    {WeatherParameter::wind_speed_10m, "wind_speed_10m", "m/s"},
    {WeatherParameter::wind_u_50m, "wind_u_50m", "m/s"},
    {WeatherParameter::wind_v_50m, "wind_v_50m", "m/s"},
    {WeatherParameter::wind_speed_50m, "wind_speed_50m", "m/s"},
    {WeatherParameter::roughness_length, "roughness_length", "m"},
    {WeatherParameter::solar_radiation, "solar_radiation", "W/m2"},
    {WeatherParameter::temperature, "temperature", "K"},
    {WeatherParameter::air_density, "air_density", "kg/m3"},
    {WeatherParameter::pressure, "pressure", "Pa"},
};

// height index 0/1/2 for 2m/10m/50m, or -1 when not a wind component
int wind_u_height(WeatherParameter p)
{
    switch (p) {
    case WeatherParameter::wind_u_2m: return 0;
    case WeatherParameter::wind_u_10m: return 1;
    case WeatherParameter::wind_u_50m: return 2;
    default: return -1;
    }
}

int wind_v_height(WeatherParameter p)
{
    switch (p) {
    case WeatherParameter::wind_v_2m: return 0;
    case WeatherParameter::wind_v_10m: return 1;
    case WeatherParameter::wind_v_50m: return 2;
    default: return -1;
    }
}

WeatherParameter speed_at_height(int height)
{
    switch (height) {
    case 0: return WeatherParameter::wind_speed_2m;
    case 1: return WeatherParameter::wind_speed_10m;
    default: return WeatherParameter::wind_speed_50m;
    }
}

} // namespace

std::string to_string(WeatherParameter p)
{
    for (const auto& info : parameter_table)
        if (info.parameter == p)
            return info.name;
    throw InvalidArgument("unknown weather parameter");
}

WeatherParameter weather_parameter_from_string(std::string_view s)
{
    for (const auto& info : parameter_table)
        if (s == info.name)
            return info.parameter;
    throw ConfigError("unknown weather parameter \"" + std::string(s) + "\"");
}

std::string unit_of(WeatherParameter p)
{
    for (const auto& info : parameter_table)
        if (info.parameter == p)
            return info.unit;
    throw InvalidArgument("unknown weather parameter");
}

void GridSpec::validate() const
{
    if (dlon <= 0.0 || dlat <= 0.0)
        throw ConfigError("grid cell size must be positive");
    if (nx < 1 || ny < 1)
        throw ConfigError("grid extent must be at least 1x1");
}

void BoundingBox::validate() const
{
    if (ne_lat < sw_lat || ne_lon < sw_lon)
        throw ConfigError("bounding box corners reversed (antimeridian wrap unsupported)");
}

SubsetResult subset(const GridField& field, const GridSpec& spec, const BoundingBox& box)
{
    spec.validate();
    box.validate();
    if (field.values.size() != static_cast<std::size_t>(spec.nx) * spec.ny)
        throw InvalidArgument("field shape does not match the grid spec");

    int i_lo = spec.nx, i_hi = -1, j_lo = spec.ny, j_hi = -1;
    for (int i = 0; i < spec.nx; ++i) {
        double lon = spec.lon_at(i);
        if (lon >= box.sw_lon && lon <= box.ne_lon) {
            i_lo = std::min(i_lo, i);
            i_hi = std::max(i_hi, i);
        }
    }
    for (int j = 0; j < spec.ny; ++j) {
        double lat = spec.lat_at(j);
        if (lat >= box.sw_lat && lat <= box.ne_lat) {
            j_lo = std::min(j_lo, j);
            j_hi = std::max(j_hi, j);
        }
    }
    if (i_hi < i_lo || j_hi < j_lo)
        throw InvalidArgument("bounding box contains no grid cell centers");

    SubsetResult out;
    out.spec = spec;
    out.spec.lon0 = spec.lon_at(i_lo);
    out.spec.lat0 = spec.lat_at(j_lo);
    out.spec.nx = i_hi - i_lo + 1;
    out.spec.ny = j_hi - j_lo + 1;
    out.field.parameter = field.parameter;
    out.field.time = field.time;
    out.field.values.reserve(static_cast<std::size_t>(out.spec.nx) * out.spec.ny);
    for (int j = j_lo; j <= j_hi; ++j)
        for (int i = i_lo; i <= i_hi; ++i)
            out.field.values.push_back(field.values[static_cast<std::size_t>(j) * spec.nx + i]);
    return out;
}

GridField wind_speed(const GridField& u, const GridField& v)
{
    int height = wind_u_height(u.parameter);
    if (height < 0)
        throw InvalidArgument("first argument must be an eastward wind component, got " +
                              to_string(u.parameter));
    if (wind_v_height(v.parameter) != height)
        throw InvalidArgument("wind components at different heights: " +
                              to_string(u.parameter) + " vs " + to_string(v.parameter));
    if (u.time != v.time)
        throw InvalidArgument("wind components at different times: " + u.time.to_iso() +
                              " vs " + v.time.to_iso());
    if (u.values.size() != v.values.size())
        throw InvalidArgument("wind components with different shapes");

    GridField out;
    out.parameter = speed_at_height(height);
    out.time = u.time;
    out.values.reserve(u.values.size());
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        if (u.values[k] && v.values[k])
            out.values.push_back(std::hypot(*u.values[k], *v.values[k]));
        else
            out.values.push_back(std::nullopt);
    }
    return out;
}

FlatTable flatten_to_table(const std::vector<GridField>& fields, const GridSpec& spec)
{
    spec.validate();
    const std::size_t cells = static_cast<std::size_t>(spec.nx) * spec.ny;

    std::set<UtcTime> times;
    std::vector<WeatherParameter> parameters;
    std::map<std::pair<std::int64_t, WeatherParameter>, const GridField*> by_key;
    for (const GridField& f : fields) {
        if (f.values.size() != cells)
            throw InvalidArgument("field " + to_string(f.parameter) +
                                  " does not match the grid shape");
        auto key = std::make_pair(f.time.seconds, f.parameter);
        if (!by_key.emplace(key, &f).second)
            throw InvalidArgument("duplicate field (" + to_string(f.parameter) + ", " +
                                  f.time.to_iso() + ")");
        times.insert(f.time);
        if (std::find(parameters.begin(), parameters.end(), f.parameter) == parameters.end())
            parameters.push_back(f.parameter);
    }
    // Column order follows the canonical parameter order, not input order.
    std::sort(parameters.begin(), parameters.end());

    FlatTable table;
    table.columns = {"utc_timestamp", "lat", "lon"};
    for (WeatherParameter p : parameters)
        table.columns.push_back(to_string(p));

    table.rows.reserve(times.size() * cells);
    for (UtcTime t : times) {
        for (int j = spec.ny - 1; j >= 0; --j) {
            for (int i = 0; i < spec.nx; ++i) {
                FlatTable::Row row;
                row.time = t;
                row.lat = spec.lat_at(j);
                row.lon = spec.lon_at(i);
                row.values.reserve(parameters.size());
                for (WeatherParameter p : parameters) {
                    auto it = by_key.find({t.seconds, p});
                    if (it == by_key.end())
                        row.values.push_back(std::nullopt);
                    else
                        row.values.push_back(
                            it->second->values[static_cast<std::size_t>(j) * spec.nx + i]);
                }
                table.rows.push_back(std::move(row));
            }
        }
    }
    return table;
}

WeatherContainer WeatherContainer::from_json(const nlohmann::json& doc)
{
    WeatherContainer c;
    const auto& grid = doc.at("grid");
    c.grid.lon0 = grid.at("lon0").get<double>();
    c.grid.lat0 = grid.at("lat0").get<double>();
    c.grid.dlon = grid.value("dlon", 0.625);
    c.grid.dlat = grid.value("dlat", 0.5);
    c.grid.nx = grid.at("nx").get<int>();
    c.grid.ny = grid.at("ny").get<int>();
    c.grid.validate();
    const std::size_t cells = static_cast<std::size_t>(c.grid.nx) * c.grid.ny;
    for (const auto& f : doc.at("fields")) {
        GridField field;
        field.parameter = weather_parameter_from_string(f.at("parameter").get<std::string>());
        field.time = UtcTime::parse_iso(f.at("time").get<std::string>());
        const auto& values = f.at("values");
        if (!values.is_array() || values.size() != cells)
            throw ConfigError("weather field " + to_string(field.parameter) + " at " +
                              field.time.to_iso() + " must carry exactly " +
                              std::to_string(cells) + " values");
        for (const auto& v : values) {
            if (v.is_null())
                field.values.push_back(std::nullopt);
            else
                field.values.push_back(v.get<double>());
        }
        c.fields.push_back(std::move(field));
    }
    return c;
}

WeatherContainer WeatherContainer::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open weather container " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("weather container " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

} // namespace gridforge
