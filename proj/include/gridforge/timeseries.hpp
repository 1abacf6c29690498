// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"
#include "gridforge/plants.hpp"
#include "gridforge/taxonomy.hpp"
#include "gridforge/tz.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridforge {

/// Fixed-resolution UTC series. Timestamps are implied by start + index,
/// never stored per point; each point carries its value and marker set.
struct TimeSeries {
    std::string series_id;
    int resolution_minutes = 60; // 15, 30 or 60
    UtcTime start;
    std::vector<std::optional<double>> values;
    std::vector<MarkerSet> markers; // same length as values

    static TimeSeries make(std::string series_id, int resolution_minutes, UtcTime start,
                           std::vector<std::optional<double>> values);

    std::size_t size() const { return values.size(); }
    UtcTime time_at(std::size_t index) const;
};

struct GridIssue {
    std::size_t index = 0; // first offending position, when positional
    std::string message;
};

std::vector<GridIssue> validate_grid(const TimeSeries& ts);

/// Linear interpolation of NA runs no longer than `max_gap_minutes` that
/// are bounded by values on both sides. Filled points gain the
/// `interpolated` marker; longer and boundary runs stay untouched.
TimeSeries fill_gaps(const TimeSeries& ts, int max_gap_minutes = 120);

/// Mean-aggregates a 15/30-minute series to hourly resolution. An hour is
/// NA when any constituent is NA; markers union and gain own_calculation.
TimeSeries aggregate_to_hourly(const TimeSeries& ts);

enum class FoldPolicy {
    // The duplicated fall-back hour resolves by order of appearance: first
    // occurrence gets the pre-transition offset.
    order_of_appearance,
};

struct LocalStampColumn {
    std::string zone; // IANA name
    std::vector<CivilTime> stamps;
    FoldPolicy disambiguation = FoldPolicy::order_of_appearance;
};

std::vector<UtcTime> to_utc(const LocalStampColumn& column);

/// Installed capacity per calendar day for one taxonomy grouping,
/// piecewise constant between commissioning events.
struct DailyCapacitySeries {
    std::string grouping; // taxonomy node id
    Date start;
    std::vector<double> capacity_mw; // one per consecutive day

    double at(Date day) const; // throws InvalidArgument outside the range
    Date end() const { return Date{start.days + static_cast<std::int32_t>(capacity_mw.size())}; }
};

struct DailyCapacityIssues {
    std::vector<std::string> missing_commissioned; // excluded record ids
    std::vector<std::string> missing_capacity;
};

DailyCapacitySeries build_daily_capacity(const std::vector<PlantRecord>& records,
                                         const std::string& grouping,
                                         const Taxonomy& taxonomy, Date first, Date last,
                                         DailyCapacityIssues* issues = nullptr);

/// generation / installed capacity of the containing UTC day. Every point
/// gains own_calculation; values above 1.02 additionally gain implausible
/// but are never clipped.
TimeSeries capacity_profile(const TimeSeries& generation, const DailyCapacitySeries& cap);

} // namespace gridforge
