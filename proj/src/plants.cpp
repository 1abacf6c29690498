// SPDX-License-Identifier: Apache-2.0
#include "gridforge/plants.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace gridforge {

namespace {

// Legal-form suffixes stripped from the end of normalized names. Multi-word
// forms are matched before single tokens.
const std::vector<std::string> multi_word_suffixes = {"gmbh co kg", "gmbh co", "co kg"};
const std::set<std::string> single_word_suffixes = {
    "gmbh", "mbh", "ag", "kg", "kgaa", "ohg", "se",  "ev",  "eg",  "sarl", "sa",
    "spa",  "srl", "bv", "nv", "ab",   "oy",  "plc", "ltd", "llc", "inc"};

std::vector<std::string> split_words(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t from,
                       std::size_t count)
{
    std::string out;
    for (std::size_t i = from; i < from + count; ++i) {
        if (!out.empty())
            out += ' ';
        out += words[i];
    }
    return out;
}

std::string display_value(const std::optional<double>& v)
{
    return v ? format_number(*v) : "";
}
std::string display_value(const std::optional<bool>& v)
{
    return v ? (*v ? "true" : "false") : "";
}
std::string display_value(const std::optional<Date>& v)
{
    return v ? v->to_iso() : "";
}
std::string display_value(const std::optional<std::string>& v)
{
    return v.value_or("");
}

bool capacities_close(double a, double b, double tolerance)
{
    double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0)
        return true;
    return std::abs(a - b) / scale <= tolerance;
}

std::optional<double> matching_capacity(const PlantRecord& r)
{
    return r.capacity_net_mw ? r.capacity_net_mw : r.capacity_gross_mw;
}

const std::optional<double>* numeric_field(const PlantRecord& r, const std::string& field)
{
    if (field == "capacity_net_mw")
        return &r.capacity_net_mw;
    if (field == "capacity_gross_mw")
        return &r.capacity_gross_mw;
    if (field == "efficiency")
        return &r.efficiency;
    if (field == "lat")
        return &r.lat;
    if (field == "lon")
        return &r.lon;
    return nullptr;
}

} // namespace

std::string to_string(GeoPrecision p)
{
    switch (p) {
    case GeoPrecision::exact: return "exact";
    case GeoPrecision::zip_centroid: return "zip_centroid";
    case GeoPrecision::district_centroid: return "district_centroid";
    }
    return "exact";
}

std::optional<GeoPrecision> geo_precision_from_string(std::string_view s)
{
    if (s == "exact")
        return GeoPrecision::exact;
    if (s == "zip_centroid")
        return GeoPrecision::zip_centroid;
    if (s == "district_centroid")
        return GeoPrecision::district_centroid;
    return std::nullopt;
}

std::string to_string(MatcherKind m)
{
    switch (m) {
    case MatcherKind::eic_exact: return "eic_exact";
    case MatcherKind::name_country_node: return "name_country_node";
    case MatcherKind::name_country_capacity: return "name_country_capacity";
    }
    return "eic_exact";
}

std::vector<std::string> validate_record(const PlantRecord& r)
{
    std::vector<std::string> issues;
    if (r.commissioned && r.decommissioned && *r.decommissioned < *r.commissioned)
        issues.push_back("decommissioned before commissioned");
    if (r.lat && (*r.lat < -90.0 || *r.lat > 90.0))
        issues.push_back("latitude outside [-90, 90]");
    if (r.lon && (*r.lon < -180.0 || *r.lon > 180.0))
        issues.push_back("longitude outside [-180, 180]");
    if (r.capacity_net_mw && *r.capacity_net_mw < 0.0)
        issues.push_back("negative net capacity");
    if (r.capacity_gross_mw && *r.capacity_gross_mw < 0.0)
        issues.push_back("negative gross capacity");
    if (r.capacity_net_mw && r.capacity_gross_mw && *r.capacity_gross_mw < *r.capacity_net_mw)
        issues.push_back("gross capacity below net capacity");
    if (r.efficiency && (*r.efficiency <= 0.0 || *r.efficiency > 1.0))
        issues.push_back("efficiency outside (0, 1]");
    return issues;
}

std::string normalize_name(std::string_view name)
{
    std::string lowered = lower_ascii(name);
    // ASCII punctuation becomes whitespace; multi-byte characters pass through.
    for (char& c : lowered) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u < 0x80 && !std::isalnum(u) && !std::isspace(u))
            c = ' ';
    }
    std::string collapsed = collapse_whitespace(lowered);
    std::vector<std::string> words = split_words(collapsed);
    bool stripped = true;
    while (stripped && words.size() > 1) {
        stripped = false;
        for (const std::string& suffix : multi_word_suffixes) {
            std::size_t n = split_words(suffix).size();
            if (words.size() > n && join_words(words, words.size() - n, n) == suffix) {
                words.resize(words.size() - n);
                stripped = true;
                break;
            }
        }
        if (!stripped && single_word_suffixes.count(words.back())) {
            words.pop_back();
            stripped = true;
        }
    }
    return join_words(words, 0, words.size());
}

void MatchPolicy::validate() const
{
    if (matchers.empty())
        throw ConfigError("match policy needs at least one matcher");
    if (!(capacity_tolerance > 0.0 && capacity_tolerance < 0.5))
        throw ConfigError("capacity tolerance must lie in (0, 0.5)");
}

// ---------------------------------------------------------------------------
// merge_lists

namespace {

struct Working {
    PlantRecord rec;
    bool matched = false;
    bool frozen = false; // ambiguous in some round; withdrawn from matching
};

std::optional<std::string> match_key(MatcherKind m, const PlantRecord& r)
{
    switch (m) {
    case MatcherKind::eic_exact:
        return r.eic;
    case MatcherKind::name_country_node: {
        std::string name = normalize_name(r.name);
        if (name.empty() || r.country.empty() || r.source_node.empty())
            return std::nullopt;
        return name + "\x1f" + r.country + "\x1f" + r.source_node;
    }
    case MatcherKind::name_country_capacity: {
        std::string name = normalize_name(r.name);
        if (name.empty() || r.country.empty() || !matching_capacity(r))
            return std::nullopt;
        return name + "\x1f" + r.country;
    }
    }
    return std::nullopt;
}

bool pair_matches(MatcherKind m, const PlantRecord& p, const PlantRecord& s,
                  double tolerance)
{
    if (m != MatcherKind::name_country_capacity)
        return true; // key equality is the whole predicate
    return capacities_close(*matching_capacity(p), *matching_capacity(s), tolerance);
}

// Fills dst from src when dst is NA; reports a conflict when both are
// present and disagree.
template <typename T>
void fuse_field(const char* field, std::optional<T>& dst, const std::optional<T>& src,
                const std::string& donor, PlantRecord& fused, MatchReport& report)
{
    if (!src)
        return;
    if (!dst) {
        dst = src;
        fused.field_provenance[field] = donor;
        return;
    }
    if (!(*dst == *src))
        report.conflicts.push_back({fused.record_id, field, display_value(dst),
                                    display_value(src)});
}

PlantRecord fuse(const PlantRecord& primary, const PlantRecord& secondary,
                 MatchReport& report)
{
    PlantRecord out = primary;
    const std::string donor =
        secondary.provenance.empty() ? secondary.record_id : secondary.provenance.front();

    fuse_field("capacity_net_mw", out.capacity_net_mw, secondary.capacity_net_mw, donor, out,
               report);
    fuse_field("capacity_gross_mw", out.capacity_gross_mw, secondary.capacity_gross_mw,
               donor, out, report);
    fuse_field("chp", out.chp, secondary.chp, donor, out, report);
    fuse_field("commissioned", out.commissioned, secondary.commissioned, donor, out, report);
    fuse_field("decommissioned", out.decommissioned, secondary.decommissioned, donor, out,
               report);
    fuse_field("eic", out.eic, secondary.eic, donor, out, report);
    fuse_field("efficiency", out.efficiency, secondary.efficiency, donor, out, report);
    if (!out.lat && !out.lon && secondary.lat && secondary.lon) {
        out.lat = secondary.lat;
        out.lon = secondary.lon;
        out.geo_precision = secondary.geo_precision;
        out.field_provenance["lat"] = donor;
        out.field_provenance["lon"] = donor;
    } else if (out.lat && secondary.lat && (*out.lat != *secondary.lat)) {
        report.conflicts.push_back(
            {out.record_id, "lat", display_value(out.lat), display_value(secondary.lat)});
    }
    if (out.technology.empty() && !secondary.technology.empty()) {
        out.technology = secondary.technology;
        out.field_provenance["technology"] = donor;
    } else if (!out.technology.empty() && !secondary.technology.empty() &&
               out.technology != secondary.technology) {
        report.conflicts.push_back(
            {out.record_id, "technology", out.technology, secondary.technology});
    }
    if (out.source_node != secondary.source_node)
        report.conflicts.push_back(
            {out.record_id, "source_node", out.source_node, secondary.source_node});

    for (const std::string& src : secondary.provenance)
        if (std::find(out.provenance.begin(), out.provenance.end(), src) ==
            out.provenance.end())
            out.provenance.push_back(src);
    out.markers |= secondary.markers;
    for (const std::string& flag : secondary.quality_flags)
        if (std::find(out.quality_flags.begin(), out.quality_flags.end(), flag) ==
            out.quality_flags.end())
            out.quality_flags.push_back(flag);
    return out;
}

} // namespace

std::vector<PlantRecord> merge_lists(const std::vector<PlantRecord>& primary,
                                     const std::vector<PlantRecord>& secondary,
                                     const MatchPolicy& policy, MatchReport& report)
{
    policy.validate();

    std::vector<Working> prim, sec;
    prim.reserve(primary.size());
    sec.reserve(secondary.size());
    for (const auto& r : primary)
        prim.push_back({r});
    for (const auto& r : secondary)
        sec.push_back({r});
    auto by_id = [](const Working& a, const Working& b) {
        return a.rec.record_id < b.rec.record_id;
    };
    std::stable_sort(prim.begin(), prim.end(), by_id);
    std::stable_sort(sec.begin(), sec.end(), by_id);

    std::vector<std::pair<std::size_t, std::size_t>> fused_pairs;

    for (MatcherKind matcher : policy.matchers) {
        std::map<std::string, std::vector<std::size_t>> prim_groups, sec_groups;
        for (std::size_t i = 0; i < prim.size(); ++i) {
            if (prim[i].matched || prim[i].frozen)
                continue;
            if (auto key = match_key(matcher, prim[i].rec))
                prim_groups[*key].push_back(i);
        }
        for (std::size_t j = 0; j < sec.size(); ++j) {
            if (sec[j].matched || sec[j].frozen)
                continue;
            if (auto key = match_key(matcher, sec[j].rec))
                sec_groups[*key].push_back(j);
        }

        // Candidate sets per record within each shared key group.
        std::map<std::size_t, std::vector<std::size_t>> prim_cands, sec_cands;
        for (const auto& [key, pidx] : prim_groups) {
            auto sit = sec_groups.find(key);
            if (sit == sec_groups.end())
                continue;
            for (std::size_t i : pidx) {
                for (std::size_t j : sit->second) {
                    if (!pair_matches(matcher, prim[i].rec, sec[j].rec,
                                      policy.capacity_tolerance))
                        continue;
                    prim_cands[i].push_back(j);
                    sec_cands[j].push_back(i);
                }
            }
        }

        // Ambiguous records are surfaced and withdrawn, never guessed at.
        for (const auto& [i, cands] : prim_cands) {
            if (cands.size() < 2)
                continue;
            MatchReport::Ambiguity amb;
            amb.record_id = prim[i].rec.record_id;
            amb.side = "primary";
            for (std::size_t j : cands)
                amb.candidates.push_back(sec[j].rec.record_id);
            amb.matcher = matcher;
            report.ambiguities.push_back(std::move(amb));
            prim[i].frozen = true;
            prim[i].rec.markers.add(MarkerFlag::implausible);
            prim[i].rec.quality_flags.push_back("ambiguous_match");
        }
        for (const auto& [j, cands] : sec_cands) {
            if (cands.size() < 2)
                continue;
            MatchReport::Ambiguity amb;
            amb.record_id = sec[j].rec.record_id;
            amb.side = "secondary";
            for (std::size_t i : cands)
                amb.candidates.push_back(prim[i].rec.record_id);
            amb.matcher = matcher;
            report.ambiguities.push_back(std::move(amb));
            sec[j].frozen = true;
            sec[j].rec.markers.add(MarkerFlag::implausible);
            sec[j].rec.quality_flags.push_back("ambiguous_match");
        }

        for (const auto& [i, cands] : prim_cands) {
            if (cands.size() != 1 || prim[i].frozen)
                continue;
            std::size_t j = cands.front();
            if (sec[j].frozen || sec_cands[j].size() != 1)
                continue;
            prim[i].matched = true;
            sec[j].matched = true;
            fused_pairs.emplace_back(i, j);
            report.matched.push_back(
                {prim[i].rec.record_id, sec[j].rec.record_id, matcher});
        }
    }

    std::vector<PlantRecord> out;
    out.reserve(prim.size() + sec.size() - fused_pairs.size());
    std::map<std::size_t, std::size_t> fused_by_prim;
    for (const auto& [i, j] : fused_pairs)
        fused_by_prim[i] = j;
    for (std::size_t i = 0; i < prim.size(); ++i) {
        auto it = fused_by_prim.find(i);
        if (it != fused_by_prim.end())
            out.push_back(fuse(prim[i].rec, sec[it->second].rec, report));
        else
            out.push_back(prim[i].rec);
    }
    for (const auto& w : sec)
        if (!w.matched)
            out.push_back(w.rec);

    std::stable_sort(out.begin(), out.end(), [](const PlantRecord& a, const PlantRecord& b) {
        return a.record_id < b.record_id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Cross-domain dedupe

void dedupe_cross_domain(std::vector<PlantRecord>& conventional,
                         std::vector<PlantRecord>& renewable, const Taxonomy& taxonomy,
                         OverlapReport& report, double capacity_tolerance)
{
    auto flag = [](PlantRecord& r) {
        r.markers.add(MarkerFlag::implausible);
        if (std::find(r.quality_flags.begin(), r.quality_flags.end(),
                      "cross_domain_duplicate") == r.quality_flags.end())
            r.quality_flags.push_back("cross_domain_duplicate");
    };

    // Duplicates are detected on the lists as delivered, before any domain
    // repair: a unit reported by both packages stays double-counted wherever
    // it ends up, so the flags must travel with the records.
    for (auto& c : conventional) {
        for (auto& r : renewable) {
            bool duplicate = false;
            std::string reason;
            if (c.eic && r.eic && *c.eic == *r.eic) {
                duplicate = true;
                reason = "eic";
            } else if (!c.country.empty() && c.country == r.country) {
                std::string cn = normalize_name(c.name), rn = normalize_name(r.name);
                auto cc = matching_capacity(c), rc = matching_capacity(r);
                if (!cn.empty() && cn == rn && cc && rc &&
                    capacities_close(*cc, *rc, capacity_tolerance)) {
                    duplicate = true;
                    reason = "name_country_capacity";
                }
            }
            if (duplicate) {
                flag(c);
                flag(r);
                report.duplicates.push_back({c.record_id, r.record_id, reason});
            }
        }
    }

    auto wants_renewable = [&](const PlantRecord& r) {
        return taxonomy.domain_of(r.source_node) == Domain::renewable;
    };
    std::vector<PlantRecord> conv_next, ren_next;
    for (auto& r : conventional) {
        if (wants_renewable(r)) {
            report.moves.push_back({r.record_id, "conventional"});
            ren_next.push_back(std::move(r));
        } else {
            conv_next.push_back(std::move(r));
        }
    }
    for (auto& r : renewable) {
        if (!wants_renewable(r)) {
            report.moves.push_back({r.record_id, "renewable"});
            conv_next.push_back(std::move(r));
        } else {
            ren_next.push_back(std::move(r));
        }
    }
    conventional = std::move(conv_next);
    renewable = std::move(ren_next);
}

// ---------------------------------------------------------------------------
// Plausibility rules

std::vector<PlantRecord> flag_implausible(std::vector<PlantRecord> records,
                                          const RuleSet& rules, const Taxonomy& taxonomy,
                                          std::vector<RuleViolation>* violations)
{
    for (const PlausibilityRule& rule : rules.rules) {
        PlantRecord probe;
        if (!numeric_field(probe, rule.field))
            throw ConfigError("plausibility rule \"" + rule.id +
                              "\" references unknown field \"" + rule.field + "\"");
        if (!rule.min && !rule.max)
            throw ConfigError("plausibility rule \"" + rule.id + "\" has no bound");
        if (rule.node && !taxonomy.contains(*rule.node))
            throw ConfigError("plausibility rule \"" + rule.id +
                              "\" references unknown taxonomy node \"" + *rule.node + "\"");
    }

    for (PlantRecord& r : records) {
        for (const PlausibilityRule& rule : rules.rules) {
            if (rule.node) {
                if (!taxonomy.contains(r.source_node) ||
                    !taxonomy.in_subtree(r.source_node, *rule.node))
                    continue;
            }
            const std::optional<double>* value = numeric_field(r, rule.field);
            if (!value->has_value())
                continue;
            bool violated = (rule.min && **value < *rule.min) ||
                            (rule.max && **value > *rule.max);
            if (!violated)
                continue;
            r.markers.add(MarkerFlag::implausible);
            if (std::find(r.quality_flags.begin(), r.quality_flags.end(), rule.id) ==
                r.quality_flags.end())
                r.quality_flags.push_back(rule.id);
            if (violations)
                violations->push_back({r.record_id, rule.id});
        }
    }
    return records;
}

} // namespace gridforge
