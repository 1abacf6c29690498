// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridforge {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data: bad numerals, undecodable bytes, ragged rows.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::string offending = {})
        : Error(what), offending_(std::move(offending)) {}
    const std::string& offending() const { return offending_; }

private:
    std::string offending_;
};

/// Invalid configuration: descriptors, taxonomies, mappings, rule sets.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// An operation precondition does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class UnmappedTermError : public Error {
public:
    explicit UnmappedTermError(std::string term)
        : Error("unmapped term: \"" + term + "\""), term_(std::move(term)) {}
    const std::string& term() const { return term_; }

private:
    std::string term_;
};

class TimeError : public Error {
public:
    using Error::Error;
};

/// Local wall time skipped by a spring-forward transition.
class NonexistentLocalTime : public TimeError {
public:
    using TimeError::TimeError;
};

/// A local stamp repeated more often than the DST fold can explain.
class AmbiguityUnresolvable : public TimeError {
public:
    using TimeError::TimeError;
};

class NonMonotoneOutput : public TimeError {
public:
    using TimeError::TimeError;
};

// ---------------------------------------------------------------------------
// Calendar values. Dates and instants are plain counters; all civil
// conversions go through the proleptic Gregorian calendar in UTC.

struct Date {
    std::int32_t days = 0; // since 1970-01-01

    auto operator<=>(const Date&) const = default;

    static Date from_civil(int year, unsigned month, unsigned day);
    static Date parse_iso(std::string_view text); // "YYYY-MM-DD"
    std::string to_iso() const;
    void to_civil(int& year, unsigned& month, unsigned& day) const;
};

struct UtcTime {
    std::int64_t seconds = 0; // since 1970-01-01T00:00:00Z

    auto operator<=>(const UtcTime&) const = default;

    static UtcTime from_civil(int year, unsigned month, unsigned day,
                              unsigned hour = 0, unsigned minute = 0,
                              unsigned second = 0);
    static UtcTime parse_iso(std::string_view text); // "YYYY-MM-DDTHH:MM:SSZ"
    std::string to_iso() const;
    Date date() const; // UTC calendar day containing this instant
};

// ---------------------------------------------------------------------------
// Provenance markers. A marker set travels with every derived data point;
// pipeline stages may only add flags, never remove them.

enum class MarkerFlag : std::uint8_t {
    implausible = 1u << 0,
    interpolated = 1u << 1,
    own_calculation = 1u << 2,
    summed_from_components = 1u << 3,
};

class MarkerSet {
public:
    MarkerSet() = default;
    MarkerSet(std::initializer_list<MarkerFlag> flags);

    void add(MarkerFlag flag);
    MarkerSet& operator|=(const MarkerSet& other);
    friend MarkerSet operator|(MarkerSet a, const MarkerSet& b) { return a |= b; }

    bool contains(MarkerFlag flag) const;
    bool contains_all(const MarkerSet& other) const;
    bool empty() const { return bits_ == 0; }
    bool operator==(const MarkerSet&) const = default;

    /// Flag names joined with ';' in sorted (alphabetical) order.
    std::string to_string() const;
    /// Inverse of to_string. Rejects unknown flags, duplicates and
    /// out-of-order joins.
    static MarkerSet parse(std::string_view text);

    static const std::vector<std::pair<MarkerFlag, std::string>>& flag_names();

private:
    std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Canonical number rendering: shortest representation that round-trips the
// exact double, always carrying a decimal point or exponent so a number
// field is never mistaken for an integer one.

std::string format_number(double value); // throws InvalidArgument on non-finite
double parse_double_strict(std::string_view text); // throws ParseError
std::int64_t parse_int_strict(std::string_view text); // throws ParseError

// ---------------------------------------------------------------------------
// Misc shared helpers

std::string sha256_hex(std::string_view bytes);

std::string_view trim(std::string_view s);
std::string lower_ascii(std::string_view s);
/// Collapses runs of ASCII whitespace to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view s);

} // namespace gridforge
