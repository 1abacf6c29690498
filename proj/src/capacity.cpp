// SPDX-License-Identifier: Apache-2.0
#include "gridforge/capacity.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace gridforge {

namespace {

std::string obs_key(const CapacityObservation& o)
{
    return o.country + "/" + std::to_string(o.year) + "/" + o.node + "/" + o.source;
}

} // namespace

std::vector<std::string> validate_observations(const std::vector<CapacityObservation>& obs,
                                               const Taxonomy& taxonomy)
{
    std::vector<std::string> problems;
    std::set<std::string> keys;
    for (const auto& o : obs) {
        if (!taxonomy.contains(o.node))
            problems.push_back("observation " + obs_key(o) + " references unknown node \"" +
                               o.node + "\"");
        if (o.value_gw && *o.value_gw < 0.0)
            problems.push_back("observation " + obs_key(o) + " has negative capacity");
        if (!keys.insert(obs_key(o)).second)
            problems.push_back("duplicate observation " + obs_key(o));
    }
    return problems;
}

std::optional<std::size_t> CapacityMatrix::row_index(const RowKey& key) const
{
    auto it = std::lower_bound(rows.begin(), rows.end(), key);
    if (it == rows.end() || !(*it == key))
        return std::nullopt;
    return static_cast<std::size_t>(it - rows.begin());
}

CapacityMatrix build_matrix(const std::vector<CapacityObservation>& obs)
{
    CapacityMatrix m;
    std::set<CapacityMatrix::RowKey> row_keys;
    std::set<std::string> source_keys;
    std::set<std::string> seen;
    for (const auto& o : obs) {
        if (!seen.insert(obs_key(o)).second)
            throw InvalidArgument("duplicate observation for (" + o.country + ", " +
                                  std::to_string(o.year) + ", " + o.node + ", " + o.source +
                                  ")");
        row_keys.insert({o.country, o.year, o.node});
        source_keys.insert(o.source);
    }
    m.rows.assign(row_keys.begin(), row_keys.end());
    m.sources.assign(source_keys.begin(), source_keys.end());
    m.cells.assign(m.rows.size(),
                   std::vector<std::optional<double>>(m.sources.size(), std::nullopt));
    m.incomplete.assign(m.rows.size(), std::vector<bool>(m.sources.size(), false));

    for (const auto& o : obs) {
        std::size_t r = *m.row_index({o.country, o.year, o.node});
        std::size_t c = static_cast<std::size_t>(
            std::lower_bound(m.sources.begin(), m.sources.end(), o.source) -
            m.sources.begin());
        m.cells[r][c] = o.value_gw;
        m.incomplete[r][c] = o.incomplete;
    }
    return m;
}

std::vector<CapacityObservation> matrix_to_observations(const CapacityMatrix& m)
{
    std::vector<CapacityObservation> obs;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        for (std::size_t c = 0; c < m.sources.size(); ++c) {
            if (!m.cells[r][c] && !m.incomplete[r][c])
                continue; // NA cell means "no observation" in a freshly built matrix
            obs.push_back({m.rows[r].country, m.rows[r].year, m.rows[r].node, m.sources[c],
                           m.cells[r][c], m.incomplete[r][c]});
        }
    }
    return obs;
}

std::vector<CapacityObservation> roll_up(const std::vector<CapacityObservation>& obs,
                                         int target_level, const Taxonomy& taxonomy)
{
    if (target_level != 1 && target_level != 2)
        throw InvalidArgument("roll-up target level must be 1 or 2");

    struct Group {
        // target node -> contributing observations
        std::map<std::string, std::vector<const CapacityObservation*>> by_target;
    };
    // (country, year, source) group; plus the universe of observed nodes per
    // (country, year, target) across all sources.
    std::map<std::tuple<std::string, int, std::string>, Group> groups;
    std::map<std::tuple<std::string, int, std::string>, std::set<std::string>> universe;

    for (const auto& o : obs) {
        const TaxonomyNode* node = taxonomy.find(o.node);
        if (!node)
            throw InvalidArgument("observation references unknown node \"" + o.node + "\"");
        if (node->level < target_level)
            throw InvalidArgument("observation at level " + std::to_string(node->level) +
                                  " (" + o.node + ") cannot roll up to level " +
                                  std::to_string(target_level));
        std::string target = taxonomy.ancestor_at_level(o.node, target_level);
        groups[{o.country, o.year, o.source}].by_target[target].push_back(&o);
        if (o.value_gw)
            universe[{o.country, o.year, target}].insert(o.node);
    }

    std::vector<CapacityObservation> out;
    for (const auto& [key, group] : groups) {
        const auto& [country, year, source] = key;
        for (const auto& [target, contributions] : group.by_target) {
            // A node is covered when the source reports it or an ancestor of
            // it (the ancestor's figure subsumes the descendant's).
            auto covered = [&](const std::string& node_id) {
                auto path = taxonomy.ancestors(node_id);
                for (const auto* c : contributions) {
                    if (!c->value_gw)
                        continue;
                    if (std::find(path.begin(), path.end(), c->node) != path.end())
                        return true;
                }
                return false;
            };

            double sum = 0.0;
            bool any_value = false;
            bool incomplete = false;
            for (const auto* c : contributions) {
                if (!c->value_gw)
                    continue;
                // Skip figures subsumed by an observed ancestor, so a source
                // reporting both a parent and its children is not counted twice.
                bool subsumed = false;
                auto path = taxonomy.ancestors(c->node);
                for (const auto* other : contributions) {
                    if (other == c || !other->value_gw)
                        continue;
                    if (other->node != c->node &&
                        std::find(path.begin(), path.end(), other->node) != path.end()) {
                        subsumed = true;
                        break;
                    }
                }
                if (subsumed)
                    continue;
                sum += *c->value_gw;
                any_value = true;
                incomplete = incomplete || c->incomplete;
            }

            auto uni = universe.find({country, year, target});
            if (uni != universe.end()) {
                for (const std::string& node_id : uni->second) {
                    if (!covered(node_id)) {
                        incomplete = true;
                        break;
                    }
                }
            }

            CapacityObservation rolled;
            rolled.country = country;
            rolled.year = year;
            rolled.node = target;
            rolled.source = source;
            rolled.value_gw = any_value ? std::optional<double>(sum) : std::nullopt;
            rolled.incomplete = any_value && incomplete;
            out.push_back(std::move(rolled));
        }
    }
    return out;
}

RangeReport range_report(const CapacityMatrix& m, const std::string& country, int year,
                         const Taxonomy& taxonomy)
{
    bool present = std::any_of(m.rows.begin(), m.rows.end(), [&](const auto& r) {
        return r.country == country && r.year == year;
    });
    if (!present)
        throw InvalidArgument("no observations for " + country + "/" + std::to_string(year));

    std::vector<CapacityObservation> selected;
    for (const auto& o : matrix_to_observations(m))
        if (o.country == country && o.year == year)
            selected.push_back(o);

    auto rolled = roll_up(selected, 1, taxonomy);

    RangeReport report;
    for (const std::string& source : m.sources) {
        RangeReport::SourceTotal total;
        total.source = source;
        double sum = 0.0;
        bool any = false;
        bool incomplete = false;
        for (const auto& o : rolled) {
            if (o.source != source)
                continue;
            if (!o.value_gw)
                continue;
            sum += *o.value_gw;
            any = true;
            incomplete = incomplete || o.incomplete;
        }
        // A total is only comparable when the source covers every level-1
        // branch that any source reports for this country/year.
        std::set<std::string> roots_everywhere, roots_here;
        for (const auto& o : rolled) {
            if (o.value_gw)
                roots_everywhere.insert(o.node);
            if (o.source == source && o.value_gw)
                roots_here.insert(o.node);
        }
        incomplete = incomplete || roots_here != roots_everywhere;
        total.total_gw = any ? std::optional<double>(sum) : std::nullopt;
        total.complete = any && !incomplete;
        report.totals.push_back(std::move(total));
    }

    for (const auto& t : report.totals) {
        if (!t.complete || !t.total_gw)
            continue;
        if (!report.min_total_gw || *t.total_gw < *report.min_total_gw)
            report.min_total_gw = *t.total_gw;
        if (!report.max_total_gw || *t.total_gw > *report.max_total_gw)
            report.max_total_gw = *t.total_gw;
    }
    return report;
}

} // namespace gridforge
