// SPDX-License-Identifier: Apache-2.0
#include "gridforge/tz.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>

namespace gridforge {

namespace {

namespace chr = std::chrono;

constexpr int extension_horizon_year = 2200;

std::string zone_database_dir()
{
    if (const char* env = std::getenv("TZDIR"); env && *env)
        return env;
    return "/usr/share/zoneinfo";
}

bool valid_zone_name(const std::string& name)
{
    if (name.empty() || name.size() > 200 || name.front() == '/')
        return false;
    if (name.find("..") != std::string::npos)
        return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '/' || c == '_' || c == '-' || c == '+';
    });
}

std::uint32_t read_u32(const unsigned char* p)
{
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::int64_t read_i64(const unsigned char* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = (v << 8) | p[i];
    return static_cast<std::int64_t>(v);
}

struct TzifCounts {
    std::uint32_t isutcnt, isstdcnt, leapcnt, timecnt, typecnt, charcnt;
};

std::size_t data_block_size(const TzifCounts& c, int time_size)
{
    return c.timecnt * (time_size + 1) + c.typecnt * 6 + c.charcnt +
           c.leapcnt * (time_size + 4) + c.isstdcnt + c.isutcnt;
}

// --- POSIX TZ footer rule -------------------------------------------------

struct PosixRule {
    enum class Kind { month_week_day, julian_no_leap, julian_zero_based } kind;
    int month = 0, week = 0, weekday = 0; // Mm.w.d
    int day_of_year = 0;                  // Jn / n
    std::int64_t seconds_of_day = 2 * 3600;
};

struct PosixTz {
    std::int32_t std_offset = 0; // seconds east of UTC
    bool has_dst = false;
    std::int32_t dst_offset = 0;
    PosixRule dst_start, dst_end;
};

void skip_name(std::string_view s, std::size_t& pos)
{
    if (pos < s.size() && s[pos] == '<') {
        while (pos < s.size() && s[pos] != '>')
            ++pos;
        if (pos < s.size())
            ++pos;
        return;
    }
    while (pos < s.size() && (std::isalpha(static_cast<unsigned char>(s[pos]))))
        ++pos;
}

std::int64_t parse_hms(std::string_view s, std::size_t& pos)
{
    bool neg = false;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        neg = s[pos] == '-';
        ++pos;
    }
    auto number = [&]() {
        std::int64_t v = 0;
        bool any = false;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            v = v * 10 + (s[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any)
            throw ConfigError("bad TZ rule: \"" + std::string(s) + "\"");
        return v;
    };
    std::int64_t secs = number() * 3600;
    if (pos < s.size() && s[pos] == ':') {
        ++pos;
        secs += number() * 60;
        if (pos < s.size() && s[pos] == ':') {
            ++pos;
            secs += number();
        }
    }
    return neg ? -secs : secs;
}

PosixRule parse_rule(std::string_view s, std::size_t& pos)
{
    PosixRule r;
    auto number = [&]() {
        int v = 0;
        bool any = false;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            v = v * 10 + (s[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any)
            throw ConfigError("bad TZ rule: \"" + std::string(s) + "\"");
        return v;
    };
    if (pos < s.size() && s[pos] == 'M') {
        ++pos;
        r.kind = PosixRule::Kind::month_week_day;
        r.month = number();
        if (pos >= s.size() || s[pos] != '.')
            throw ConfigError("bad TZ rule: \"" + std::string(s) + "\"");
        ++pos;
        r.week = number();
        if (pos >= s.size() || s[pos] != '.')
            throw ConfigError("bad TZ rule: \"" + std::string(s) + "\"");
        ++pos;
        r.weekday = number();
    } else if (pos < s.size() && s[pos] == 'J') {
        ++pos;
        r.kind = PosixRule::Kind::julian_no_leap;
        r.day_of_year = number();
    } else {
        r.kind = PosixRule::Kind::julian_zero_based;
        r.day_of_year = number();
    }
    if (pos < s.size() && s[pos] == '/') {
        ++pos;
        r.seconds_of_day = parse_hms(s, pos);
    }
    return r;
}

PosixTz parse_posix_tz(std::string_view s)
{
    PosixTz tz;
    std::size_t pos = 0;
    if (pos < s.size() && s[pos] == ':')
        throw ConfigError("unsupported TZ footer: \"" + std::string(s) + "\"");
    skip_name(s, pos);
    if (pos >= s.size())
        throw ConfigError("bad TZ footer: \"" + std::string(s) + "\"");
    // POSIX offsets count seconds west of UTC.
    tz.std_offset = static_cast<std::int32_t>(-parse_hms(s, pos));
    if (pos < s.size() && s[pos] != ',') {
        std::size_t name_start = pos;
        skip_name(s, pos);
        if (pos > name_start) {
            tz.has_dst = true;
            if (pos < s.size() && s[pos] != ',')
                tz.dst_offset = static_cast<std::int32_t>(-parse_hms(s, pos));
            else
                tz.dst_offset = tz.std_offset + 3600;
        }
    }
    if (tz.has_dst) {
        if (pos >= s.size() || s[pos] != ',')
            throw ConfigError("TZ footer lacks DST rules: \"" + std::string(s) + "\"");
        ++pos;
        tz.dst_start = parse_rule(s, pos);
        if (pos >= s.size() || s[pos] != ',')
            throw ConfigError("TZ footer lacks DST end rule: \"" + std::string(s) + "\"");
        ++pos;
        tz.dst_end = parse_rule(s, pos);
    }
    return tz;
}

// Local (wall-clock) seconds of the rule's trigger in the given year.
std::int64_t rule_local_seconds(const PosixRule& r, int year)
{
    chr::sys_days day{};
    switch (r.kind) {
    case PosixRule::Kind::month_week_day: {
        chr::weekday wd{static_cast<unsigned>(r.weekday)};
        chr::month mo{static_cast<unsigned>(r.month)};
        if (r.week == 5) {
            day = chr::sys_days{chr::year_month_weekday_last{chr::year{year}, mo,
                                                             chr::weekday_last{wd}}};
        } else {
            day = chr::sys_days{chr::year_month_weekday{
                chr::year{year}, mo, chr::weekday_indexed{wd, static_cast<unsigned>(r.week)}}};
        }
        break;
    }
    case PosixRule::Kind::julian_no_leap: {
        int n = r.day_of_year; // 1..365, Feb 29 never counted
        static const int cum[] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
        int m = 11;
        while (m > 0 && cum[m] >= n)
            --m;
        day = chr::sys_days{chr::year_month_day{chr::year{year},
                                                chr::month{static_cast<unsigned>(m + 1)},
                                                chr::day{static_cast<unsigned>(n - cum[m])}}};
        break;
    }
    case PosixRule::Kind::julian_zero_based:
        day = chr::sys_days{chr::year_month_day{chr::year{year}, chr::January, chr::day{1}}} +
              chr::days{r.day_of_year};
        break;
    }
    return static_cast<std::int64_t>(day.time_since_epoch().count()) * 86400 +
           r.seconds_of_day;
}

} // namespace

// ---------------------------------------------------------------------------
// CivilTime

std::int64_t CivilTime::as_utc_seconds() const
{
    chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59)
        throw ParseError("invalid civil time: " + to_string());
    return static_cast<std::int64_t>(chr::sys_days{ymd}.time_since_epoch().count()) * 86400 +
           hour * 3600 + minute * 60 + second;
}

CivilTime CivilTime::from_utc_seconds(std::int64_t seconds)
{
    std::int64_t d = seconds / 86400;
    if (seconds < 0 && seconds % 86400 != 0)
        --d;
    std::int64_t rem = seconds - d * 86400;
    chr::year_month_day ymd{chr::sys_days{chr::days{d}}};
    return CivilTime{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), static_cast<unsigned>(rem / 3600),
                     static_cast<unsigned>(rem / 60 % 60), static_cast<unsigned>(rem % 60)};
}

CivilTime CivilTime::parse(std::string_view text)
{
    // Accepts both the ISO 'T' separator and the single space common in
    // TSO exports; seconds are optional.
    if (text.size() != 16 && text.size() != 19)
        throw ParseError("invalid local timestamp: \"" + std::string(text) + "\"",
                         std::string(text));
    if (text[10] != 'T' && text[10] != ' ')
        throw ParseError("invalid local timestamp: \"" + std::string(text) + "\"",
                         std::string(text));
    Date d = Date::parse_iso(text.substr(0, 10));
    auto two = [&](std::size_t at) {
        char a = text[at], b = text[at + 1];
        if (!std::isdigit(static_cast<unsigned char>(a)) ||
            !std::isdigit(static_cast<unsigned char>(b)))
            throw ParseError("invalid local timestamp: \"" + std::string(text) + "\"",
                             std::string(text));
        return unsigned((a - '0') * 10 + (b - '0'));
    };
    if (text[13] != ':' || (text.size() == 19 && text[16] != ':'))
        throw ParseError("invalid local timestamp: \"" + std::string(text) + "\"",
                         std::string(text));
    unsigned hh = two(11), mm = two(14), ss = text.size() == 19 ? two(17) : 0;
    CivilTime c = CivilTime::from_utc_seconds(static_cast<std::int64_t>(d.days) * 86400);
    c.hour = hh;
    c.minute = mm;
    c.second = ss;
    c.as_utc_seconds(); // validates ranges
    return c;
}

std::string CivilTime::to_string() const
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02u", year, month, day, hour,
                  minute, second);
    return buf;
}

// ---------------------------------------------------------------------------
// TimeZone

std::shared_ptr<const TimeZone> TimeZone::load(const std::string& iana_name)
{
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const TimeZone>> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(iana_name); it != cache.end())
        return it->second;
    if (!valid_zone_name(iana_name))
        throw ConfigError("invalid time zone name: \"" + iana_name + "\"");
    auto tz = std::shared_ptr<TimeZone>(new TimeZone());
    tz->name_ = iana_name;
    tz->parse_tzif(zone_database_dir() + "/" + iana_name);
    cache.emplace(iana_name, tz);
    return tz;
}

void TimeZone::parse_tzif(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("unknown time zone \"" + name_ + "\" (no zone database entry)");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    auto need = [&](std::size_t n) {
        if (bytes.size() < n)
            throw ConfigError("truncated zone file for \"" + name_ + "\"");
    };
    need(44);
    if (bytes.compare(0, 4, "TZif") != 0)
        throw ConfigError("\"" + name_ + "\" is not a TZif zone file");
    char version = bytes[4];
    auto counts_at = [&](std::size_t off) {
        TzifCounts c{};
        c.isutcnt = read_u32(p + off + 20);
        c.isstdcnt = read_u32(p + off + 24);
        c.leapcnt = read_u32(p + off + 28);
        c.timecnt = read_u32(p + off + 32);
        c.typecnt = read_u32(p + off + 36);
        c.charcnt = read_u32(p + off + 40);
        return c;
    };
    TzifCounts c1 = counts_at(0);
    std::size_t off = 44;
    int time_size = 4;
    TzifCounts c = c1;
    if (version >= '2') {
        off = 44 + data_block_size(c1, 4);
        need(off + 44);
        c = counts_at(off);
        off += 44;
        time_size = 8;
    }
    if (c.typecnt == 0)
        throw ConfigError("zone file for \"" + name_ + "\" has no offset types");
    need(off + data_block_size(c, time_size));

    std::vector<std::int64_t> trans(c.timecnt);
    for (std::uint32_t i = 0; i < c.timecnt; ++i) {
        trans[i] = time_size == 8
                       ? read_i64(p + off + i * 8)
                       : static_cast<std::int32_t>(read_u32(p + off + i * 4));
    }
    off += c.timecnt * time_size;
    std::vector<std::uint8_t> type_idx(p + off, p + off + c.timecnt);
    off += c.timecnt;
    struct TtInfo {
        std::int32_t utoff;
        bool isdst;
    };
    std::vector<TtInfo> types(c.typecnt);
    for (std::uint32_t i = 0; i < c.typecnt; ++i) {
        types[i].utoff = static_cast<std::int32_t>(read_u32(p + off + i * 6));
        types[i].isdst = p[off + i * 6 + 4] != 0;
    }
    off += c.typecnt * 6;
    std::size_t footer_off = off + c.charcnt + c.leapcnt * (time_size + 4) + c.isstdcnt +
                             c.isutcnt;

    for (std::uint32_t i = 0; i < c.timecnt; ++i)
        if (type_idx[i] >= c.typecnt)
            throw ConfigError("corrupt zone file for \"" + name_ + "\"");

    // Initial offset: first standard-time type, else the first type.
    std::int32_t initial = types[0].utoff;
    for (const auto& t : types) {
        if (!t.isdst) {
            initial = t.utoff;
            break;
        }
    }
    trans_ = std::move(trans);
    offsets_.clear();
    offsets_.reserve(trans_.size() + 1);
    offsets_.push_back(initial);
    for (std::uint32_t i = 0; i < c.timecnt; ++i)
        offsets_.push_back(types[type_idx[i]].utoff);

    if (version >= '2' && footer_off + 2 <= bytes.size() && bytes[footer_off] == '\n') {
        std::size_t end = bytes.find('\n', footer_off + 1);
        if (end != std::string::npos && end > footer_off + 1)
            extend_from_footer(
                std::string_view(bytes).substr(footer_off + 1, end - footer_off - 1));
    }
}

void TimeZone::extend_from_footer(std::string_view tz_string)
{
    PosixTz rule;
    try {
        rule = parse_posix_tz(tz_string);
    } catch (const ConfigError&) {
        return; // keep the explicit table; exotic footers are rare
    }
    if (!rule.has_dst)
        return;
    int from_year =
        trans_.empty() ? 1970 : CivilTime::from_utc_seconds(trans_.back()).year + 1;
    for (int y = from_year; y <= extension_horizon_year; ++y) {
        // Rule times are wall-clock in the offset active before the switch.
        std::int64_t to_dst = rule_local_seconds(rule.dst_start, y) - rule.std_offset;
        std::int64_t to_std = rule_local_seconds(rule.dst_end, y) - rule.dst_offset;
        if (to_dst < to_std) {
            trans_.push_back(to_dst);
            offsets_.push_back(rule.dst_offset);
            trans_.push_back(to_std);
            offsets_.push_back(rule.std_offset);
        } else { // southern hemisphere
            trans_.push_back(to_std);
            offsets_.push_back(rule.std_offset);
            trans_.push_back(to_dst);
            offsets_.push_back(rule.dst_offset);
        }
    }
}

std::size_t TimeZone::segment_at(std::int64_t utc_seconds) const
{
    return static_cast<std::size_t>(
        std::upper_bound(trans_.begin(), trans_.end(), utc_seconds) - trans_.begin());
}

TimeZone::LocalResult TimeZone::to_utc(const CivilTime& local) const
{
    const std::int64_t wall = local.as_utc_seconds();
    // Offsets are bounded well inside a day, so every viable segment lies in
    // this window.
    std::size_t lo = segment_at(wall - 2 * 86400);
    std::size_t hi = segment_at(wall + 2 * 86400);
    LocalResult result;
    int found = 0;
    for (std::size_t s = lo; s <= hi && s < offsets_.size(); ++s) {
        std::int64_t candidate = wall - offsets_[s];
        if (segment_at(candidate) != s)
            continue;
        if (found == 0)
            result.first = UtcTime{candidate};
        else if (found == 1)
            result.second = UtcTime{candidate};
        ++found;
    }
    if (found == 0)
        result.kind = LocalKind::nonexistent;
    else if (found == 1)
        result.kind = LocalKind::unique;
    else
        result.kind = LocalKind::ambiguous;
    return result;
}

CivilTime TimeZone::to_local(UtcTime t) const
{
    return CivilTime::from_utc_seconds(t.seconds + offset_at(t));
}

std::int32_t TimeZone::offset_at(UtcTime t) const
{
    return offsets_[segment_at(t.seconds)];
}

} // namespace gridforge
