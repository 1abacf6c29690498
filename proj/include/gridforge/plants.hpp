// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"
#include "gridforge/taxonomy.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gridforge {

/// How precisely a unit's coordinates are known; mixing UTM-derived points
/// with zip-code and district centroids is normal for this data.
enum class GeoPrecision { exact, zip_centroid, district_centroid };

std::string to_string(GeoPrecision p);
std::optional<GeoPrecision> geo_precision_from_string(std::string_view s);

/// One generation unit as carried through the plant-list pipeline.
struct PlantRecord {
    std::string record_id;
    std::string name;
    std::string country; // ISO 3166 alpha-2
    std::string source_node; // taxonomy node id
    std::string technology;
    std::optional<double> capacity_net_mw;
    std::optional<double> capacity_gross_mw;
    std::optional<bool> chp;
    std::optional<Date> commissioned;
    std::optional<Date> decommissioned;
    std::optional<double> lat;
    std::optional<double> lon;
    std::optional<GeoPrecision> geo_precision;
    std::optional<std::string> eic;
    std::optional<double> efficiency; // researched values pass through only
    std::vector<std::string> provenance; // source ids, primary first
    MarkerSet markers;
    std::map<std::string, std::string> field_provenance; // field -> donor source
    std::vector<std::string> quality_flags;              // violated rule ids
};

/// Field-level invariant violations; values are never altered, only listed.
std::vector<std::string> validate_record(const PlantRecord& r);

/// Lowercases, strips punctuation, collapses whitespace and drops trailing
/// legal-form suffixes (GmbH, AG, ...) so the same plant spelled by two
/// providers compares equal.
std::string normalize_name(std::string_view name);

enum class MatcherKind {
    eic_exact,
    name_country_node,
    name_country_capacity,
};

std::string to_string(MatcherKind m);

struct MatchPolicy {
    std::vector<MatcherKind> matchers = {MatcherKind::eic_exact,
                                         MatcherKind::name_country_node,
                                         MatcherKind::name_country_capacity};
    double capacity_tolerance = 0.05; // relative

    void validate() const; // throws ConfigError
};

struct MatchReport {
    struct Pair {
        std::string primary_id;
        std::string secondary_id;
        MatcherKind matcher;
    };
    struct Ambiguity {
        std::string record_id;
        std::string side; // "primary" | "secondary"
        std::vector<std::string> candidates;
        MatcherKind matcher;
    };
    struct Conflict {
        std::string record_id; // fused record (primary id)
        std::string field;
        std::string kept;      // primary's value
        std::string discarded; // secondary's value
    };

    std::vector<Pair> matched;
    std::vector<Ambiguity> ambiguities;
    std::vector<Conflict> conflicts;
};

/// Full outer merge of two plant lists. Matched pairs fuse (primary wins
/// conflicts, NA fields fill from secondary); unmatched records pass
/// through. Output is sorted by record id, so it does not depend on input
/// order.
std::vector<PlantRecord> merge_lists(const std::vector<PlantRecord>& primary,
                                     const std::vector<PlantRecord>& secondary,
                                     const MatchPolicy& policy, MatchReport& report);

struct OverlapReport {
    struct Move {
        std::string record_id;
        std::string from; // "conventional" | "renewable"
    };
    struct Duplicate {
        std::string conventional_id;
        std::string renewable_id;
        std::string reason; // "eic" | "name_country_capacity"
    };
    std::vector<Move> moves;
    std::vector<Duplicate> duplicates;
};

/// Repairs domain placement and surfaces cross-list duplicate candidates.
/// Records are moved or flagged, never deleted.
void dedupe_cross_domain(std::vector<PlantRecord>& conventional,
                         std::vector<PlantRecord>& renewable, const Taxonomy& taxonomy,
                         OverlapReport& report, double capacity_tolerance = 0.05);

struct PlausibilityRule {
    std::string id;
    std::string field; // capacity_net_mw, capacity_gross_mw, efficiency, lat, lon
    std::optional<double> min;
    std::optional<double> max;
    std::optional<std::string> node; // restrict to a taxonomy subtree
};

struct RuleSet {
    std::vector<PlausibilityRule> rules;
};

struct RuleViolation {
    std::string record_id;
    std::string rule_id;
};

std::vector<PlantRecord> flag_implausible(std::vector<PlantRecord> records,
                                          const RuleSet& rules, const Taxonomy& taxonomy,
                                          std::vector<RuleViolation>* violations = nullptr);

} // namespace gridforge
