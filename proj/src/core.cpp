// SPDX-License-Identifier: Apache-2.0
#include "gridforge/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <openssl/evp.h>

namespace gridforge {

namespace {

namespace chr = std::chrono;

bool all_digits(std::string_view s)
{
    return !s.empty() &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Parses a fixed-width decimal field, throwing with the full source text as context.
int parse_field(std::string_view text, std::string_view field, std::string_view whole)
{
    if (!all_digits(field))
        throw ParseError("malformed " + std::string(text) + ": \"" + std::string(whole) + "\"",
                         std::string(whole));
    int value = 0;
    std::from_chars(field.data(), field.data() + field.size(), value);
    return value;
}

} // namespace

// ---------------------------------------------------------------------------
// Date

Date Date::from_civil(int year, unsigned month, unsigned day)
{
    chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
    if (!ymd.ok())
        throw ParseError("invalid calendar date " + std::to_string(year) + "-" +
                         std::to_string(month) + "-" + std::to_string(day));
    return Date{static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse_iso(std::string_view text)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ParseError("invalid date: \"" + std::string(text) + "\"", std::string(text));
    int y = parse_field("date", text.substr(0, 4), text);
    int m = parse_field("date", text.substr(5, 2), text);
    int d = parse_field("date", text.substr(8, 2), text);
    return from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

void Date::to_civil(int& year, unsigned& month, unsigned& day) const
{
    chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    year = static_cast<int>(ymd.year());
    month = static_cast<unsigned>(ymd.month());
    day = static_cast<unsigned>(ymd.day());
}

std::string Date::to_iso() const
{
    int y;
    unsigned m, d;
    to_civil(y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

// ---------------------------------------------------------------------------
// UtcTime

UtcTime UtcTime::from_civil(int year, unsigned month, unsigned day, unsigned hour,
                            unsigned minute, unsigned second)
{
    if (hour > 23 || minute > 59 || second > 59)
        throw ParseError("invalid time of day");
    Date d = Date::from_civil(year, month, day);
    return UtcTime{static_cast<std::int64_t>(d.days) * 86400 + hour * 3600 + minute * 60 +
                   second};
}

UtcTime UtcTime::parse_iso(std::string_view text)
{
    // YYYY-MM-DDTHH:MM:SSZ
    if (text.size() != 20 || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
        text.back() != 'Z')
        throw ParseError("invalid datetime: \"" + std::string(text) + "\"", std::string(text));
    Date d = Date::parse_iso(text.substr(0, 10));
    int hh = parse_field("datetime", text.substr(11, 2), text);
    int mm = parse_field("datetime", text.substr(14, 2), text);
    int ss = parse_field("datetime", text.substr(17, 2), text);
    if (hh > 23 || mm > 59 || ss > 59)
        throw ParseError("invalid datetime: \"" + std::string(text) + "\"", std::string(text));
    return UtcTime{static_cast<std::int64_t>(d.days) * 86400 + hh * 3600 + mm * 60 + ss};
}

std::string UtcTime::to_iso() const
{
    Date d = date();
    std::int64_t rem = seconds - static_cast<std::int64_t>(d.days) * 86400;
    char buf[40];
    int y;
    unsigned mo, da;
    d.to_civil(y, mo, da);
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, mo, da,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

Date UtcTime::date() const
{
    std::int64_t d = seconds / 86400;
    if (seconds < 0 && seconds % 86400 != 0)
        --d;
    return Date{static_cast<std::int32_t>(d)};
}

// ---------------------------------------------------------------------------
// MarkerSet

const std::vector<std::pair<MarkerFlag, std::string>>& MarkerSet::flag_names()
{
    // Alphabetical; to_string relies on this order.
    static const std::vector<std::pair<MarkerFlag, std::string>> names = {
        {MarkerFlag::implausible, "implausible"},
        {MarkerFlag::interpolated, "interpolated"},
        {MarkerFlag::own_calculation, "own_calculation"},
        {MarkerFlag::summed_from_components, "summed_from_components"},
    };
    return names;
}

MarkerSet::MarkerSet(std::initializer_list<MarkerFlag> flags)
{
    for (MarkerFlag f : flags)
        add(f);
}

void MarkerSet::add(MarkerFlag flag)
{
    bits_ |= static_cast<std::uint8_t>(flag);
}

MarkerSet& MarkerSet::operator|=(const MarkerSet& other)
{
    bits_ |= other.bits_;
    return *this;
}

bool MarkerSet::contains(MarkerFlag flag) const
{
    return (bits_ & static_cast<std::uint8_t>(flag)) != 0;
}

bool MarkerSet::contains_all(const MarkerSet& other) const
{
    return (bits_ & other.bits_) == other.bits_;
}

std::string MarkerSet::to_string() const
{
    std::string out;
    for (const auto& [flag, name] : flag_names()) {
        if (!contains(flag))
            continue;
        if (!out.empty())
            out += ';';
        out += name;
    }
    return out;
}

MarkerSet MarkerSet::parse(std::string_view text)
{
    MarkerSet set;
    if (text.empty())
        return set;
    std::size_t pos = 0;
    std::string previous;
    while (pos <= text.size()) {
        std::size_t next = text.find(';', pos);
        std::string_view token =
            text.substr(pos, next == std::string_view::npos ? next : next - pos);
        auto& names = flag_names();
        auto it = std::find_if(names.begin(), names.end(),
                               [&](const auto& p) { return p.second == token; });
        if (it == names.end())
            throw ParseError("unknown marker flag: \"" + std::string(token) + "\"",
                             std::string(token));
        if (set.contains(it->first))
            throw ParseError("duplicate marker flag: \"" + std::string(token) + "\"");
        if (!previous.empty() && !(previous < it->second))
            throw ParseError("marker flags not sorted: \"" + std::string(text) + "\"");
        previous = it->second;
        set.add(it->first);
        if (next == std::string_view::npos)
            break;
        pos = next + 1;
    }
    return set;
}

// ---------------------------------------------------------------------------
// Numbers

std::string format_number(double value)
{
    if (!std::isfinite(value))
        throw InvalidArgument("cannot render non-finite number");
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    std::string out(buf, res.ptr);
    if (out.find('.') == std::string::npos && out.find('e') == std::string::npos)
        out += ".0";
    return out;
}

double parse_double_strict(std::string_view text)
{
    double value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError("not a number: \"" + std::string(text) + "\"", std::string(text));
    return value;
}

std::int64_t parse_int_strict(std::string_view text)
{
    std::int64_t value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError("not an integer: \"" + std::string(text) + "\"", std::string(text));
    return value;
}

// ---------------------------------------------------------------------------
// Hashing and string helpers

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xf];
    }
    return out;
}

std::string_view trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return s.substr(b, e - b);
}

std::string lower_ascii(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string collapse_whitespace(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool in_ws = true; // leading whitespace dropped
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty())
            out += ' ';
        in_ws = false;
        out += static_cast<char>(c);
    }
    return out;
}

} // namespace gridforge
