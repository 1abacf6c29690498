// SPDX-License-Identifier: Apache-2.0
#include "gridforge/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace gridforge {

using nlohmann::json;

namespace {

const std::set<std::string> level1_roots = {"renewable", "fossil", "nuclear",
                                            "other_or_unspecified"};

std::optional<Domain> domain_from_string(const std::string& s)
{
    if (s == "conventional")
        return Domain::conventional;
    if (s == "renewable")
        return Domain::renewable;
    return std::nullopt;
}

} // namespace

std::string to_string(Domain d)
{
    return d == Domain::conventional ? "conventional" : "renewable";
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy Taxonomy::from_nodes(std::vector<TaxonomyNode> nodes)
{
    Taxonomy t;
    t.nodes_ = std::move(nodes);
    for (std::size_t i = 0; i < t.nodes_.size(); ++i)
        t.index_.emplace(t.nodes_[i].id, i);
    return t;
}

Taxonomy Taxonomy::from_json(const json& doc)
{
    if (!doc.is_array())
        throw ConfigError("taxonomy file must be a JSON array of nodes");
    std::vector<TaxonomyNode> nodes;
    for (const json& n : doc) {
        TaxonomyNode node;
        node.id = n.at("id").get<std::string>();
        node.label = n.value("label", node.id);
        node.level = n.at("level").get<int>();
        if (n.contains("parent") && !n["parent"].is_null())
            node.parent = n["parent"].get<std::string>();
        if (n.contains("domain") && !n["domain"].is_null()) {
            auto d = domain_from_string(n["domain"].get<std::string>());
            if (!d)
                throw ConfigError("taxonomy node \"" + node.id + "\": unknown domain \"" +
                                  n["domain"].get<std::string>() + "\"");
            node.domain = d;
        }
        node.note = n.value("note", "");
        nodes.push_back(std::move(node));
    }
    return from_nodes(std::move(nodes));
}

Taxonomy Taxonomy::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open taxonomy " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("taxonomy " + path.string() + ": " + e.what());
    }
    Taxonomy t = from_json(doc);
    auto issues = t.validate();
    if (!issues.empty())
        throw ConfigError("taxonomy " + path.string() + " invalid: " + issues[0].message +
                          (issues.size() > 1
                               ? " (+" + std::to_string(issues.size() - 1) + " more)"
                               : ""));
    return t;
}

const TaxonomyNode* Taxonomy::find(const std::string& id) const
{
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::vector<std::string> Taxonomy::ancestors(const std::string& id) const
{
    std::vector<std::string> path;
    const TaxonomyNode* node = find(id);
    if (!node)
        throw InvalidArgument("unknown taxonomy node \"" + id + "\"");
    std::set<std::string> seen;
    while (node) {
        if (!seen.insert(node->id).second)
            throw ConfigError("taxonomy cycle at node \"" + node->id + "\"");
        path.push_back(node->id);
        if (!node->parent)
            break;
        const TaxonomyNode* parent = find(*node->parent);
        if (!parent)
            throw ConfigError("taxonomy node \"" + node->id + "\" has unknown parent \"" +
                              *node->parent + "\"");
        node = parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

Domain Taxonomy::domain_of(const std::string& id) const
{
    const TaxonomyNode* node = find(id);
    if (!node)
        throw InvalidArgument("unknown taxonomy node \"" + id + "\"");
    std::set<std::string> seen;
    while (node) {
        if (!seen.insert(node->id).second)
            throw ConfigError("taxonomy cycle at node \"" + node->id + "\"");
        if (node->domain)
            return *node->domain;
        if (!node->parent)
            throw ConfigError("unresolved domain for taxonomy node \"" + id + "\"");
        node = find(*node->parent);
        if (!node)
            throw ConfigError("unresolved domain for taxonomy node \"" + id + "\"");
    }
    throw ConfigError("unresolved domain for taxonomy node \"" + id + "\"");
}

bool Taxonomy::in_subtree(const std::string& id, const std::string& ancestor) const
{
    auto path = ancestors(id);
    return std::find(path.begin(), path.end(), ancestor) != path.end();
}

std::string Taxonomy::ancestor_at_level(const std::string& id, int level) const
{
    auto path = ancestors(id);
    if (level < 1 || static_cast<std::size_t>(level) > path.size())
        throw InvalidArgument("node \"" + id + "\" has no ancestor at level " +
                              std::to_string(level));
    return path[static_cast<std::size_t>(level) - 1];
}

std::vector<std::string> Taxonomy::leaves() const
{
    std::set<std::string> parents;
    for (const TaxonomyNode& n : nodes_)
        if (n.parent)
            parents.insert(*n.parent);
    std::vector<std::string> out;
    for (const TaxonomyNode& n : nodes_)
        if (!parents.count(n.id))
            out.push_back(n.id);
    return out;
}

std::vector<TaxonomyIssue> Taxonomy::validate() const
{
    std::vector<TaxonomyIssue> issues;
    auto report = [&](const std::string& id, std::string code, std::string message) {
        issues.push_back(TaxonomyIssue{id, std::move(code), std::move(message)});
    };

    std::set<std::string> seen;
    for (const TaxonomyNode& n : nodes_)
        if (!seen.insert(n.id).second)
            report(n.id, "duplicate_id", "duplicate node id \"" + n.id + "\"");

    std::set<std::string> roots;
    for (const TaxonomyNode& n : nodes_) {
        if (n.level < 1 || n.level > 3)
            report(n.id, "bad_level",
                   "node \"" + n.id + "\" has level " + std::to_string(n.level) +
                       " outside 1..3");
        if (n.level == 1) {
            roots.insert(n.id);
            if (n.parent)
                report(n.id, "root_with_parent", "level-1 node \"" + n.id + "\" has a parent");
        } else if (!n.parent) {
            report(n.id, "missing_parent",
                   "node \"" + n.id + "\" at level " + std::to_string(n.level) +
                       " has no parent");
        } else {
            const TaxonomyNode* p = find(*n.parent);
            if (!p)
                report(n.id, "unknown_parent",
                       "node \"" + n.id + "\" references unknown parent \"" + *n.parent +
                           "\"");
            else if (p->level != n.level - 1)
                report(n.id, "level_skip",
                       "node \"" + n.id + "\" at level " + std::to_string(n.level) +
                           " has parent \"" + p->id + "\" at level " +
                           std::to_string(p->level));
        }
    }

    if (roots != level1_roots) {
        std::string have;
        for (const auto& r : roots)
            have += (have.empty() ? "" : ", ") + r;
        report("", "bad_roots",
               "level-1 set must be exactly {renewable, fossil, nuclear, "
               "other_or_unspecified}; found {" +
                   have + "}");
    }

    // Parent chains must terminate without revisiting a node.
    for (const TaxonomyNode& n : nodes_) {
        std::set<std::string> walked;
        const TaxonomyNode* cur = &n;
        while (cur) {
            if (!walked.insert(cur->id).second) {
                report(n.id, "cycle", "cycle through node \"" + cur->id + "\"");
                break;
            }
            cur = cur->parent ? find(*cur->parent) : nullptr;
        }
    }

    // Every node must resolve to a package domain.
    for (const TaxonomyNode& n : nodes_) {
        try {
            domain_of(n.id);
        } catch (const Error& e) {
            report(n.id, "unresolved_domain", e.what());
        }
    }
    return issues;
}

std::vector<TaxonomyIssue> validate_taxonomy(const Taxonomy& t)
{
    return t.validate();
}

// ---------------------------------------------------------------------------
// Vocabulary mappings

VocabMapping VocabMapping::from_json(const json& doc)
{
    VocabMapping m;
    m.id = doc.at("id").get<std::string>();
    for (const json& e : doc.at("entries")) {
        Entry entry;
        entry.term = e.at("term").get<std::string>();
        if (e.contains("context") && !e["context"].is_null())
            entry.context = e["context"].get<std::string>();
        entry.node = e.at("node").get<std::string>();
        m.entries.push_back(std::move(entry));
    }
    return m;
}

VocabMapping VocabMapping::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open vocabulary mapping " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("mapping " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

std::vector<std::string> validate_mapping(const VocabMapping& m, const Taxonomy& t)
{
    std::vector<std::string> problems;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& e : m.entries) {
        if (!t.contains(e.node))
            problems.push_back("mapping \"" + m.id + "\": entry \"" + e.term +
                               "\" targets unknown node \"" + e.node + "\"");
        auto key = std::make_pair(normalize_term(e.term), e.context.value_or(""));
        if (!keys.insert(key).second)
            problems.push_back("mapping \"" + m.id + "\": duplicate entry for term \"" +
                               e.term + "\"");
    }
    return problems;
}

std::string normalize_term(std::string_view term)
{
    return collapse_whitespace(lower_ascii(term));
}

std::string classify(std::string_view term, const VocabMapping& mapping, const Taxonomy& t,
                     const std::optional<std::string>& context)
{
    std::string needle = normalize_term(term);
    std::string ctx = context ? normalize_term(*context) : std::string{};
    const VocabMapping::Entry* fallback = nullptr;
    for (const auto& e : mapping.entries) {
        if (normalize_term(e.term) != needle)
            continue;
        std::string entry_ctx = e.context ? normalize_term(*e.context) : std::string{};
        if (entry_ctx == ctx) {
            if (!t.contains(e.node))
                throw ConfigError("mapping \"" + mapping.id + "\" targets unknown node \"" +
                                  e.node + "\"");
            return e.node;
        }
        if (entry_ctx.empty())
            fallback = &e; // context-free entry backs up a missing context match
    }
    if (fallback) {
        if (!t.contains(fallback->node))
            throw ConfigError("mapping \"" + mapping.id + "\" targets unknown node \"" +
                              fallback->node + "\"");
        return fallback->node;
    }
    throw UnmappedTermError(needle);
}

} // namespace gridforge
