// SPDX-License-Identifier: Apache-2.0
#include "gridforge/core.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace gridforge;

TEST_CASE("dates and instants round-trip through ISO text")
{
    Date d = Date::from_civil(2017, 3, 26);
    CHECK(d.to_iso() == "2017-03-26");
    CHECK(Date::parse_iso("2017-03-26") == d);
    CHECK_THROWS_AS(Date::parse_iso("2017-02-30"), ParseError);
    CHECK_THROWS_AS(Date::parse_iso("2017/02/03"), ParseError);

    UtcTime t = UtcTime::from_civil(2017, 10, 29, 1, 0, 0);
    CHECK(t.to_iso() == "2017-10-29T01:00:00Z");
    CHECK(UtcTime::parse_iso("2017-10-29T01:00:00Z") == t);
    CHECK_THROWS_AS(UtcTime::parse_iso("2017-10-29 01:00:00Z"), ParseError);
    CHECK_THROWS_AS(UtcTime::parse_iso("2017-10-29T25:00:00Z"), ParseError);

    CHECK(UtcTime{0}.to_iso() == "1970-01-01T00:00:00Z");
    CHECK(UtcTime{-1}.date().to_iso() == "1969-12-31");
    CHECK(t.date() == Date::from_civil(2017, 10, 29));
}

TEST_CASE("marker sets render as sorted semicolon joins")
{
    MarkerSet set{MarkerFlag::own_calculation, MarkerFlag::interpolated};
    CHECK(set.to_string() == "interpolated;own_calculation");
    CHECK(MarkerSet{}.to_string().empty());

    MarkerSet all{MarkerFlag::implausible, MarkerFlag::interpolated,
                  MarkerFlag::own_calculation, MarkerFlag::summed_from_components};
    CHECK(all.to_string() ==
          "implausible;interpolated;own_calculation;summed_from_components");

    CHECK(MarkerSet::parse("interpolated;own_calculation") == set);
    CHECK(MarkerSet::parse("") == MarkerSet{});
    CHECK_THROWS_AS(MarkerSet::parse("made_up_flag"), ParseError);
    CHECK_THROWS_AS(MarkerSet::parse("own_calculation;interpolated"), ParseError);
    CHECK_THROWS_AS(MarkerSet::parse("interpolated;interpolated"), ParseError);

    SUBCASE("flags only accumulate")
    {
        MarkerSet grown = set;
        grown |= MarkerSet{MarkerFlag::implausible};
        CHECK(grown.contains_all(set));
        CHECK(grown.contains(MarkerFlag::implausible));
    }
}

TEST_CASE("number formatting is shortest round-trip with a mandatory point")
{
    CHECK(format_number(0.0) == "0.0");
    CHECK(format_number(25.0) == "25.0");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1234.5) == "1234.5");
    CHECK(format_number(-3.25) == "-3.25");
    CHECK_THROWS_AS(format_number(std::nan("")), InvalidArgument);
    CHECK_THROWS_AS(format_number(INFINITY), InvalidArgument);

    SUBCASE("random doubles survive format/parse exactly")
    {
        std::mt19937_64 rng(20170326);
        std::uniform_real_distribution<double> dist(-1e9, 1e9);
        for (int i = 0; i < 2000; ++i) {
            double x = dist(rng);
            CHECK(parse_double_strict(format_number(x)) == x);
        }
    }
}

TEST_CASE("strict numeric parsing consumes the whole token")
{
    CHECK(parse_double_strict("1.5") == 1.5);
    CHECK_THROWS_AS(parse_double_strict("1.5x"), ParseError);
    CHECK_THROWS_AS(parse_double_strict(""), ParseError);
    CHECK(parse_int_strict("-42") == -42);
    CHECK_THROWS_AS(parse_int_strict("4.2"), ParseError);
}

TEST_CASE("sha256 matches the reference digests")
{
    // Digests computed with the system sha256sum tool.
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("hello world\n") ==
          "a948904f2f0f479b8f8197694b30184b0d2ed1c1cd2a1ec0fb85d299a192a447");
}

TEST_CASE("string helpers")
{
    CHECK(trim("  a b  ") == "a b");
    CHECK(lower_ascii("Kraftwerk X") == "kraftwerk x");
    CHECK(collapse_whitespace("  a \t b\n c ") == "a b c");
    CHECK(collapse_whitespace("") == "");
}
