// SPDX-License-Identifier: Apache-2.0
#include "gridforge/tz.hpp"

#include "doctest.h"

using namespace gridforge;

// Expected instants below were checked against the IANA zone database
// (zdump -v Europe/Berlin): CET = UTC+1 until 2017-03-26 01:00Z, CEST =
// UTC+2 until 2017-10-29 01:00Z.

TEST_CASE("zone loading validates names")
{
    CHECK(TimeZone::load("Europe/Berlin")->name() == "Europe/Berlin");
    CHECK_NOTHROW(TimeZone::load("UTC"));
    CHECK_THROWS_AS(TimeZone::load("Mars/Olympus"), ConfigError);
    CHECK_THROWS_AS(TimeZone::load("../etc/passwd"), ConfigError);
    CHECK_THROWS_AS(TimeZone::load(""), ConfigError);
}

TEST_CASE("fixed offsets around the spring transition")
{
    auto berlin = TimeZone::load("Europe/Berlin");

    auto cet = berlin->to_utc(CivilTime{2017, 3, 26, 1, 0, 0});
    REQUIRE(cet.kind == TimeZone::LocalKind::unique);
    CHECK(cet.first == UtcTime::from_civil(2017, 3, 26, 0, 0, 0));

    auto cest = berlin->to_utc(CivilTime{2017, 3, 26, 3, 0, 0});
    REQUIRE(cest.kind == TimeZone::LocalKind::unique);
    CHECK(cest.first == UtcTime::from_civil(2017, 3, 26, 1, 0, 0));

    auto gap = berlin->to_utc(CivilTime{2017, 3, 26, 2, 30, 0});
    CHECK(gap.kind == TimeZone::LocalKind::nonexistent);
}

TEST_CASE("the fall-back hour is ambiguous with ordered candidates")
{
    auto berlin = TimeZone::load("Europe/Berlin");
    auto fold = berlin->to_utc(CivilTime{2017, 10, 29, 2, 0, 0});
    REQUIRE(fold.kind == TimeZone::LocalKind::ambiguous);
    CHECK(fold.first == UtcTime::from_civil(2017, 10, 29, 0, 0, 0));
    CHECK(fold.second == UtcTime::from_civil(2017, 10, 29, 1, 0, 0));
}

TEST_CASE("utc to local and back is the identity")
{
    auto berlin = TimeZone::load("Europe/Berlin");
    for (std::int64_t seconds :
         {UtcTime::from_civil(2017, 1, 15, 12, 0, 0).seconds,
          UtcTime::from_civil(2017, 3, 26, 0, 30, 0).seconds,
          UtcTime::from_civil(2017, 3, 26, 1, 0, 0).seconds,
          UtcTime::from_civil(2017, 7, 1, 23, 45, 0).seconds,
          UtcTime::from_civil(2017, 10, 29, 0, 15, 0).seconds,
          UtcTime::from_civil(2017, 10, 29, 1, 15, 0).seconds}) {
        UtcTime t{seconds};
        CivilTime local = berlin->to_local(t);
        auto back = berlin->to_utc(local);
        if (back.kind == TimeZone::LocalKind::unique)
            CHECK(back.first == t);
        else if (back.kind == TimeZone::LocalKind::ambiguous)
            CHECK((back.first == t || back.second == t));
        else
            FAIL("round trip hit a nonexistent local time");
    }
}

TEST_CASE("years beyond the zone file's table still transition")
{
    // The system table for Berlin ends in 2037; beyond that the POSIX
    // footer rule (last Sunday of March / October) takes over.
    auto berlin = TimeZone::load("Europe/Berlin");
    auto summer = berlin->to_utc(CivilTime{2045, 7, 1, 12, 0, 0});
    REQUIRE(summer.kind == TimeZone::LocalKind::unique);
    CHECK(summer.first == UtcTime::from_civil(2045, 7, 1, 10, 0, 0)); // CEST

    auto winter = berlin->to_utc(CivilTime{2045, 1, 1, 12, 0, 0});
    REQUIRE(winter.kind == TimeZone::LocalKind::unique);
    CHECK(winter.first == UtcTime::from_civil(2045, 1, 1, 11, 0, 0)); // CET

    // 2045-03-26 is the last Sunday of March 2045.
    auto gap = berlin->to_utc(CivilTime{2045, 3, 26, 2, 30, 0});
    CHECK(gap.kind == TimeZone::LocalKind::nonexistent);
}

TEST_CASE("civil time parsing accepts both separators")
{
    CivilTime a = CivilTime::parse("2017-03-26T01:30:00");
    CivilTime b = CivilTime::parse("2017-03-26 01:30");
    CHECK(a == b);
    CHECK(a.to_string() == "2017-03-26T01:30:00");
    CHECK_THROWS_AS(CivilTime::parse("2017-03-26"), ParseError);
    CHECK_THROWS_AS(CivilTime::parse("2017-03-26T24:00:00"), ParseError);
}

TEST_CASE("UTC zone has no folds or gaps over a whole year")
{
    auto utc = TimeZone::load("UTC");
    for (int day = 0; day < 365; day += 30) {
        CivilTime c = CivilTime::from_utc_seconds(static_cast<std::int64_t>(day) * 86400 +
                                                  3600 * 7);
        auto r = utc->to_utc(c);
        REQUIRE(r.kind == TimeZone::LocalKind::unique);
        CHECK(utc->to_local(r.first) == c);
    }
}
