// SPDX-License-Identifier: Apache-2.0
#include "gridforge/capacity.hpp"

#include <algorithm>
#include <map>

#include "doctest.h"

using namespace gridforge;

namespace {

Taxonomy shipped()
{
    static Taxonomy t = Taxonomy::load(GRIDFORGE_DATA_DIR "/taxonomy.json");
    return t;
}

CapacityObservation obs(std::string country, int year, std::string node, std::string source,
                        std::optional<double> value)
{
    return CapacityObservation{std::move(country), year, std::move(node), std::move(source),
                               value, false};
}

} // namespace

TEST_CASE("build_matrix pivots with stable ordering")
{
    SUBCASE("two sources land in adjacent columns of one row")
    {
        auto m = build_matrix({obs("FR", 2015, "wind", "src_a", 10.3),
                               obs("FR", 2015, "wind", "src_b", 10.8)});
        REQUIRE(m.rows.size() == 1);
        REQUIRE(m.sources.size() == 2);
        CHECK(m.sources == std::vector<std::string>{"src_a", "src_b"});
        CHECK(m.cells[0][0] == 10.3);
        CHECK(m.cells[0][1] == 10.8);
    }
    SUBCASE("single observation leaves the rest NA")
    {
        auto m = build_matrix({obs("FR", 2015, "wind", "src_a", 10.3),
                               obs("DE", 2015, "wind", "src_b", 45.0)});
        CHECK(m.rows.size() == 2);
        auto fr = m.row_index({"FR", 2015, "wind"});
        REQUIRE(fr.has_value());
        CHECK(m.cells[*fr][0] == 10.3);
        CHECK(!m.cells[*fr][1].has_value()); // never coerced to zero
    }
    SUBCASE("duplicate key is rejected with both observations named")
    {
        CHECK_THROWS_AS(build_matrix({obs("FR", 2015, "wind", "src_a", 10.3),
                                      obs("FR", 2015, "wind", "src_a", 10.4)}),
                        InvalidArgument);
    }
    SUBCASE("rows sort lexicographically")
    {
        auto m = build_matrix({obs("FR", 2016, "wind", "s", 1.0),
                               obs("FR", 2015, "wind", "s", 1.0),
                               obs("DE", 2016, "solar", "s", 1.0)});
        CHECK(m.rows[0].country == "DE");
        CHECK(m.rows[1].year == 2015);
    }
    SUBCASE("losslessness: populated cells equal the input multiset")
    {
        std::vector<CapacityObservation> in = {obs("FR", 2015, "wind", "a", 1.5),
                                               obs("FR", 2015, "solar", "a", 0.0),
                                               obs("DE", 2014, "lignite", "b", 20.0)};
        auto round = matrix_to_observations(build_matrix(in));
        CHECK(round.size() == in.size());
        for (const auto& o : in) {
            CHECK(std::any_of(round.begin(), round.end(), [&](const auto& r) {
                return r.country == o.country && r.year == o.year && r.node == o.node &&
                       r.source == o.source && r.value_gw == o.value_gw;
            }));
        }
    }
}

TEST_CASE("roll_up sums the hierarchy with honest coverage flags")
{
    Taxonomy t = shipped();

    SUBCASE("complete sum")
    {
        auto rolled = roll_up({obs("DE", 2015, "lignite", "a", 20.0),
                               obs("DE", 2015, "hard_coal", "a", 15.0)},
                              1, t);
        REQUIRE(rolled.size() == 1);
        CHECK(rolled[0].node == "fossil");
        CHECK(rolled[0].value_gw == 35.0);
        CHECK(!rolled[0].incomplete);
    }
    SUBCASE("gap covered by another source flags incomplete")
    {
        auto rolled = roll_up({obs("DE", 2015, "lignite", "a", 20.0),
                               obs("DE", 2015, "hard_coal", "a", std::nullopt),
                               obs("DE", 2015, "hard_coal", "b", 14.0)},
                              1, t);
        std::map<std::string, CapacityObservation> by_source;
        for (const auto& o : rolled)
            by_source[o.source] = o;
        CHECK(by_source.at("a").value_gw == 20.0);
        CHECK(by_source.at("a").incomplete);
        CHECK(by_source.at("b").value_gw == 14.0);
        CHECK(by_source.at("b").incomplete); // b misses lignite that a reports
    }
    SUBCASE("all children NA yields NA")
    {
        auto rolled = roll_up({obs("DE", 2015, "lignite", "a", std::nullopt),
                               obs("DE", 2015, "hard_coal", "a", std::nullopt)},
                              1, t);
        REQUIRE(rolled.size() == 1);
        CHECK(!rolled[0].value_gw.has_value());
    }
    SUBCASE("level-3 observations compose: 3->2->1 equals 3->1")
    {
        std::vector<CapacityObservation> leaves = {
            obs("DE", 2015, "biogas", "a", 4.0),
            obs("DE", 2015, "solid_biomass", "a", 3.0),
            obs("DE", 2015, "wind_onshore", "a", 40.0),
            obs("DE", 2015, "wind_offshore", "a", std::nullopt),
            obs("DE", 2015, "wind_offshore", "b", 5.0),
            obs("DE", 2015, "run_of_river", "b", 4.5),
        };
        auto direct = roll_up(leaves, 1, t);
        auto via_two = roll_up(roll_up(leaves, 2, t), 1, t);

        auto key = [](const CapacityObservation& o) {
            return o.country + "/" + std::to_string(o.year) + "/" + o.node + "/" + o.source;
        };
        std::map<std::string, CapacityObservation> da, dv;
        for (const auto& o : direct)
            da[key(o)] = o;
        for (const auto& o : via_two)
            dv[key(o)] = o;
        REQUIRE(da.size() == dv.size());
        for (const auto& [k, o] : da) {
            REQUIRE(dv.count(k));
            CHECK(dv[k].value_gw == o.value_gw);
            CHECK(dv[k].incomplete == o.incomplete);
        }
    }
    SUBCASE("observations below the target level are rejected")
    {
        CHECK_THROWS_AS(roll_up({obs("DE", 2015, "fossil", "a", 1.0)}, 2, t),
                        InvalidArgument);
    }
    SUBCASE("zero survives as zero, NA as NA")
    {
        auto rolled = roll_up({obs("DE", 2015, "lignite", "a", 0.0)}, 1, t);
        REQUIRE(rolled.size() == 1);
        CHECK(rolled[0].value_gw == 0.0); // a real zero, not NA
    }
}

TEST_CASE("range_report reproduces the France 2015 spread")
{
    Taxonomy t = shipped();
    // Four sources whose level-1 totals are 105, 112, 121 and 129 GW.
    std::vector<CapacityObservation> fixture = {
        // source s1: total 105
        obs("FR", 2015, "nuclear", "s1", 63.0),
        obs("FR", 2015, "fossil", "s1", 22.0),
        obs("FR", 2015, "renewable", "s1", 19.5),
        obs("FR", 2015, "other_or_unspecified", "s1", 0.5),
        // source s2: total 112
        obs("FR", 2015, "nuclear", "s2", 63.5),
        obs("FR", 2015, "fossil", "s2", 24.0),
        obs("FR", 2015, "renewable", "s2", 24.0),
        obs("FR", 2015, "other_or_unspecified", "s2", 0.5),
        // source s3: total 121
        obs("FR", 2015, "nuclear", "s3", 63.25),
        obs("FR", 2015, "fossil", "s3", 26.0),
        obs("FR", 2015, "renewable", "s3", 31.0),
        obs("FR", 2015, "other_or_unspecified", "s3", 0.75),
        // source s4: total 129
        obs("FR", 2015, "nuclear", "s4", 63.5),
        obs("FR", 2015, "fossil", "s4", 27.25),
        obs("FR", 2015, "renewable", "s4", 38.0),
        obs("FR", 2015, "other_or_unspecified", "s4", 0.25),
    };
    auto m = build_matrix(fixture);
    RangeReport report = range_report(m, "FR", 2015, t);
    REQUIRE(report.totals.size() == 4);
    REQUIRE(report.min_total_gw.has_value());
    REQUIRE(report.max_total_gw.has_value());
    CHECK(*report.min_total_gw == 105.0);
    CHECK(*report.max_total_gw == 129.0);

    SUBCASE("single source: min equals max")
    {
        auto single = build_matrix({obs("DE", 2015, "nuclear", "only", 10.0)});
        RangeReport r = range_report(single, "DE", 2015, t);
        CHECK(*r.min_total_gw == *r.max_total_gw);
    }
    SUBCASE("absent country/year is an error")
    {
        CHECK_THROWS_AS(range_report(m, "ES", 2015, t), InvalidArgument);
    }
    SUBCASE("all-NA sources give an error-free report with no complete totals")
    {
        auto na = build_matrix({obs("IT", 2015, "nuclear", "x", std::nullopt)});
        RangeReport r = range_report(na, "IT", 2015, t);
        CHECK(!r.min_total_gw.has_value());
        CHECK(!r.max_total_gw.has_value());
        REQUIRE(r.totals.size() == 1);
        CHECK(!r.totals[0].complete);
    }
    SUBCASE("incomplete totals are excluded from the spread")
    {
        std::vector<CapacityObservation> mixed = fixture;
        // s5 reports only nuclear: incomplete, must not shrink the minimum
        mixed.push_back(obs("FR", 2015, "nuclear", "s5", 63.0));
        RangeReport r = range_report(build_matrix(mixed), "FR", 2015, t);
        CHECK(*r.min_total_gw == 105.0);
        auto s5 = std::find_if(r.totals.begin(), r.totals.end(),
                               [](const auto& s) { return s.source == "s5"; });
        REQUIRE(s5 != r.totals.end());
        CHECK(!s5->complete);
        CHECK(s5->total_gw == 63.0);
    }
}

TEST_CASE("observation validation catches duplicates and unknown nodes")
{
    Taxonomy t = shipped();
    CHECK(validate_observations({obs("DE", 2015, "lignite", "a", 1.0)}, t).empty());
    CHECK(!validate_observations({obs("DE", 2015, "ghost", "a", 1.0)}, t).empty());
    CHECK(!validate_observations({obs("DE", 2015, "lignite", "a", -1.0)}, t).empty());
    CHECK(!validate_observations({obs("DE", 2015, "lignite", "a", 1.0),
                                  obs("DE", 2015, "lignite", "a", 2.0)},
                                 t)
               .empty());
}
