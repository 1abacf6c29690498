// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"
#include "gridforge/taxonomy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridforge {

/// One national statistic: (country, year, technology node, source) with a
/// value in GW or NA. Zero and NA are distinct and stay distinct.
struct CapacityObservation {
    std::string country; // ISO 3166 alpha-2
    int year = 0;
    std::string node;   // taxonomy node id
    std::string source; // source id
    std::optional<double> value_gw;
    bool incomplete = false; // set by roll_up when coverage has gaps
};

std::vector<std::string> validate_observations(const std::vector<CapacityObservation>& obs,
                                               const Taxonomy& taxonomy);

/// Pivot of observations: one row per (country, year, node), one column per
/// source, adjacent so sources can be contrasted. A cell is NA exactly when
/// no observation exists; NA is never coerced to zero.
struct CapacityMatrix {
    struct RowKey {
        std::string country;
        int year = 0;
        std::string node;

        auto operator<=>(const RowKey&) const = default;
    };

    std::vector<RowKey> rows;         // lexicographic order
    std::vector<std::string> sources; // lexicographic order
    std::vector<std::vector<std::optional<double>>> cells; // [row][source]
    std::vector<std::vector<bool>> incomplete;             // same shape

    std::optional<std::size_t> row_index(const RowKey& key) const;
};

CapacityMatrix build_matrix(const std::vector<CapacityObservation>& obs);

std::vector<CapacityObservation> matrix_to_observations(const CapacityMatrix& m);

/// Sums observations up the taxonomy to `target_level` per (country, year,
/// source). A sum is flagged incomplete when some descendant observed by
/// any other source is missing here; it is NA only when every descendant
/// is NA.
std::vector<CapacityObservation> roll_up(const std::vector<CapacityObservation>& obs,
                                         int target_level, const Taxonomy& taxonomy);

struct RangeReport {
    struct SourceTotal {
        std::string source;
        std::optional<double> total_gw;
        bool complete = false;
    };

    std::vector<SourceTotal> totals; // one per source column
    std::optional<double> min_total_gw; // over complete totals only
    std::optional<double> max_total_gw;
};

RangeReport range_report(const CapacityMatrix& m, const std::string& country, int year,
                         const Taxonomy& taxonomy);

} // namespace gridforge
