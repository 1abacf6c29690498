// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gridforge {

/// Which data package a leaf belongs to. Hydro technologies are split so
/// that no generation unit can be counted in both packages.
enum class Domain { conventional, renewable };

std::string to_string(Domain d);

struct TaxonomyNode {
    std::string id;
    std::string label;
    int level = 1; // 1..3
    std::optional<std::string> parent;
    std::optional<Domain> domain; // explicit override; otherwise inherited
    std::string note;             // provenance of this node's placement
};

struct TaxonomyIssue {
    std::string node_id;
    std::string code; // "duplicate_id", "level_skip", "cycle", ...
    std::string message;
};

/// The canonical three-level classification of energy sources and
/// technologies. Four fixed roots; leaves carry a resolved package domain.
class Taxonomy {
public:
    static Taxonomy from_nodes(std::vector<TaxonomyNode> nodes);
    static Taxonomy from_json(const nlohmann::json& doc);
    static Taxonomy load(const std::filesystem::path& path);

    const std::vector<TaxonomyNode>& nodes() const { return nodes_; }
    const TaxonomyNode* find(const std::string& id) const;
    bool contains(const std::string& id) const { return find(id) != nullptr; }

    /// Path from the level-1 root down to `id`, inclusive.
    std::vector<std::string> ancestors(const std::string& id) const;
    Domain domain_of(const std::string& id) const;
    /// True when `id` equals `ancestor` or lies below it.
    bool in_subtree(const std::string& id, const std::string& ancestor) const;
    /// The ancestor of `id` at `level`; id itself when already there.
    std::string ancestor_at_level(const std::string& id, int level) const;
    std::vector<std::string> leaves() const;

    std::vector<TaxonomyIssue> validate() const;

private:
    std::vector<TaxonomyNode> nodes_;
    std::map<std::string, std::size_t> index_; // first occurrence wins
};

std::vector<TaxonomyIssue> validate_taxonomy(const Taxonomy& t);

// ---------------------------------------------------------------------------
// Source-vocabulary mappings

struct VocabMapping {
    struct Entry {
        std::string term;
        std::optional<std::string> context;
        std::string node;
    };

    std::string id;
    std::vector<Entry> entries;

    static VocabMapping from_json(const nlohmann::json& doc);
    static VocabMapping load(const std::filesystem::path& path);
};

std::vector<std::string> validate_mapping(const VocabMapping& m, const Taxonomy& t);

/// Trim, casefold and whitespace-collapse, applied to both mapping entries
/// and lookup terms so spelling variants of the same label coincide.
std::string normalize_term(std::string_view term);

/// Resolves a source term to a taxonomy node id. Throws UnmappedTermError —
/// unmapped vocabulary is never silently bucketed.
std::string classify(std::string_view term, const VocabMapping& mapping, const Taxonomy& t,
                     const std::optional<std::string>& context = std::nullopt);

} // namespace gridforge
