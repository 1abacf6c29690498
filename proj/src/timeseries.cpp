// SPDX-License-Identifier: Apache-2.0
#include "gridforge/timeseries.hpp"

#include <algorithm>
#include <map>

namespace gridforge {

namespace {

constexpr double profile_implausible_above = 1.0 + 0.02;

bool valid_resolution(int minutes)
{
    return minutes == 15 || minutes == 30 || minutes == 60;
}

} // namespace

TimeSeries TimeSeries::make(std::string series_id, int resolution_minutes, UtcTime start,
                            std::vector<std::optional<double>> values)
{
    TimeSeries ts;
    ts.series_id = std::move(series_id);
    ts.resolution_minutes = resolution_minutes;
    ts.start = start;
    ts.markers.assign(values.size(), MarkerSet{});
    ts.values = std::move(values);
    auto issues = validate_grid(ts);
    if (!issues.empty())
        throw InvalidArgument("invalid series \"" + ts.series_id + "\": " +
                              issues[0].message);
    return ts;
}

UtcTime TimeSeries::time_at(std::size_t index) const
{
    return UtcTime{start.seconds +
                   static_cast<std::int64_t>(index) * resolution_minutes * 60};
}

std::vector<GridIssue> validate_grid(const TimeSeries& ts)
{
    std::vector<GridIssue> issues;
    if (!valid_resolution(ts.resolution_minutes))
        issues.push_back({0, "resolution must be 15, 30 or 60 minutes, not " +
                                 std::to_string(ts.resolution_minutes)});
    else if (ts.start.seconds % (static_cast<std::int64_t>(ts.resolution_minutes) * 60) != 0)
        issues.push_back({0, "start " + ts.start.to_iso() + " is not aligned to the " +
                                 std::to_string(ts.resolution_minutes) +
                                 "-minute resolution"});
    if (ts.values.size() != ts.markers.size())
        issues.push_back({std::min(ts.values.size(), ts.markers.size()),
                          "values length " + std::to_string(ts.values.size()) +
                              " differs from markers length " +
                              std::to_string(ts.markers.size())});
    return issues;
}

// ---------------------------------------------------------------------------
// Gap interpolation

TimeSeries fill_gaps(const TimeSeries& ts, int max_gap_minutes)
{
    if (!validate_grid(ts).empty())
        throw InvalidArgument("fill_gaps requires a valid grid");
    if (max_gap_minutes < 0 || max_gap_minutes % ts.resolution_minutes != 0)
        throw InvalidArgument("max gap must be a non-negative multiple of the resolution");

    const std::size_t max_run =
        static_cast<std::size_t>(max_gap_minutes / ts.resolution_minutes);
    TimeSeries out = ts;
    const std::size_t n = out.values.size();
    std::size_t i = 0;
    while (i < n) {
        if (out.values[i]) {
            ++i;
            continue;
        }
        std::size_t run_start = i;
        while (i < n && !out.values[i])
            ++i;
        std::size_t run_len = i - run_start;
        // Only interior runs bounded by values on both sides qualify.
        if (run_start == 0 || i == n || run_len > max_run)
            continue;
        double left = *out.values[run_start - 1];
        double right = *out.values[i];
        for (std::size_t k = 0; k < run_len; ++k) {
            double t = static_cast<double>(k + 1) / static_cast<double>(run_len + 1);
            out.values[run_start + k] = left + (right - left) * t;
            out.markers[run_start + k].add(MarkerFlag::interpolated);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hourly aggregation

TimeSeries aggregate_to_hourly(const TimeSeries& ts)
{
    if (!validate_grid(ts).empty())
        throw InvalidArgument("aggregate_to_hourly requires a valid grid");
    if (ts.resolution_minutes == 60)
        throw InvalidArgument("series \"" + ts.series_id + "\" is already hourly");
    if (ts.start.seconds % 3600 != 0)
        throw InvalidArgument("series \"" + ts.series_id +
                              "\" does not start on a full hour");

    const std::size_t k = static_cast<std::size_t>(60 / ts.resolution_minutes);
    TimeSeries out;
    out.series_id = ts.series_id;
    out.resolution_minutes = 60;
    out.start = ts.start;
    const std::size_t hours = (ts.values.size() + k - 1) / k;
    out.values.reserve(hours);
    out.markers.reserve(hours);
    for (std::size_t h = 0; h < hours; ++h) {
        double sum = 0.0;
        bool complete = true;
        MarkerSet markers;
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t idx = h * k + j;
            if (idx >= ts.values.size() || !ts.values[idx]) {
                complete = false;
            } else {
                sum += *ts.values[idx];
            }
            if (idx < ts.markers.size())
                markers |= ts.markers[idx];
        }
        markers.add(MarkerFlag::own_calculation);
        out.values.push_back(complete ? std::optional<double>(sum / static_cast<double>(k))
                                      : std::nullopt);
        out.markers.push_back(markers);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Local-time normalization

std::vector<UtcTime> to_utc(const LocalStampColumn& column)
{
    auto zone = TimeZone::load(column.zone);
    std::vector<UtcTime> out;
    out.reserve(column.stamps.size());
    std::map<CivilTime, int> occurrences;
    for (const CivilTime& stamp : column.stamps) {
        auto result = zone->to_utc(stamp);
        switch (result.kind) {
        case TimeZone::LocalKind::unique:
            out.push_back(result.first);
            break;
        case TimeZone::LocalKind::nonexistent:
            throw NonexistentLocalTime("local time " + stamp.to_string() +
                                       " does not exist in " + column.zone);
        case TimeZone::LocalKind::ambiguous: {
            int seen = ++occurrences[stamp];
            if (seen == 1)
                out.push_back(result.first);
            else if (seen == 2)
                out.push_back(result.second);
            else
                throw AmbiguityUnresolvable("local time " + stamp.to_string() +
                                            " appears " + std::to_string(seen) +
                                            " times in " + column.zone);
            break;
        }
        }
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i - 1] < out[i]))
            throw NonMonotoneOutput("UTC output not strictly increasing at index " +
                                    std::to_string(i) + " (" + out[i].to_iso() + ")");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Daily capacity and profiles

double DailyCapacitySeries::at(Date day) const
{
    if (day < start || day >= end())
        throw InvalidArgument("day " + day.to_iso() + " outside capacity series range");
    return capacity_mw[static_cast<std::size_t>(day.days - start.days)];
}

DailyCapacitySeries build_daily_capacity(const std::vector<PlantRecord>& records,
                                         const std::string& grouping,
                                         const Taxonomy& taxonomy, Date first, Date last,
                                         DailyCapacityIssues* issues)
{
    if (last < first)
        throw InvalidArgument("capacity range ends before it starts");
    DailyCapacitySeries series;
    series.grouping = grouping;
    series.start = first;
    const std::size_t days = static_cast<std::size_t>(last.days - first.days) + 1;
    series.capacity_mw.assign(days, 0.0);

    // Commissioning events as +/- capacity deltas, accumulated across days.
    std::map<std::int32_t, double> deltas;
    for (const PlantRecord& r : records) {
        if (!taxonomy.contains(r.source_node) || !taxonomy.in_subtree(r.source_node, grouping))
            continue;
        if (!r.commissioned) {
            if (issues)
                issues->missing_commissioned.push_back(r.record_id);
            continue;
        }
        if (!r.capacity_net_mw) {
            if (issues)
                issues->missing_capacity.push_back(r.record_id);
            continue;
        }
        deltas[r.commissioned->days] += *r.capacity_net_mw;
        if (r.decommissioned)
            deltas[r.decommissioned->days] -= *r.capacity_net_mw;
    }

    double level = 0.0;
    auto it = deltas.begin();
    for (; it != deltas.end() && it->first <= first.days; ++it)
        level += it->second;
    for (std::size_t d = 0; d < days; ++d) {
        while (it != deltas.end() && it->first <= first.days + static_cast<std::int32_t>(d)) {
            level += it->second;
            ++it;
        }
        series.capacity_mw[d] = level;
    }
    return series;
}

TimeSeries capacity_profile(const TimeSeries& generation, const DailyCapacitySeries& cap)
{
    if (!validate_grid(generation).empty())
        throw InvalidArgument("capacity_profile requires a valid grid");
    if (generation.resolution_minutes > 60)
        throw InvalidArgument("generation must be hourly or finer");

    TimeSeries out = generation;
    out.series_id = generation.series_id + "_profile";
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        Date day = generation.time_at(i).date();
        double installed = cap.at(day); // throws when the range is not covered
        if (installed <= 0.0)
            throw InvalidArgument("installed capacity not positive on " + day.to_iso());
        out.markers[i].add(MarkerFlag::own_calculation);
        if (!out.values[i])
            continue;
        double profile = *out.values[i] / installed;
        out.values[i] = profile;
        if (profile > profile_implausible_above)
            out.markers[i].add(MarkerFlag::implausible);
    }
    return out;
}

} // namespace gridforge
