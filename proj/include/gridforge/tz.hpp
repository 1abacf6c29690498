// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridforge/core.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gridforge {

/// A wall-clock reading with no zone attached.
struct CivilTime {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;
    unsigned hour = 0;
    unsigned minute = 0;
    unsigned second = 0;

    auto operator<=>(const CivilTime&) const = default;

    /// Seconds since the epoch as if this reading were UTC.
    std::int64_t as_utc_seconds() const;
    static CivilTime from_utc_seconds(std::int64_t seconds);

    static CivilTime parse(std::string_view text); // "YYYY-MM-DD[T ]HH:MM[:SS]"
    std::string to_string() const;                 // "YYYY-MM-DDTHH:MM:SS"
};

/// One IANA time zone, backed by the binary TZif file in the system zone
/// database (TZDIR, default /usr/share/zoneinfo). Transitions beyond the
/// file's table are synthesized from the POSIX TZ footer rule.
class TimeZone {
public:
    /// Loads and caches a zone. Throws ConfigError for names that do not
    /// resolve to a parseable TZif file.
    static std::shared_ptr<const TimeZone> load(const std::string& iana_name);

    const std::string& name() const { return name_; }

    enum class LocalKind { unique, ambiguous, nonexistent };

    struct LocalResult {
        LocalKind kind = LocalKind::unique;
        // For unique: first is the instant. For ambiguous: first uses the
        // pre-transition offset, second the post-transition one. For
        // nonexistent both are unset.
        UtcTime first;
        UtcTime second;
    };

    LocalResult to_utc(const CivilTime& local) const;
    CivilTime to_local(UtcTime t) const;
    std::int32_t offset_at(UtcTime t) const; // seconds east of UTC

private:
    TimeZone() = default;
    void parse_tzif(const std::string& path);
    void extend_from_footer(std::string_view tz_string);
    std::size_t segment_at(std::int64_t utc_seconds) const;

    std::string name_;
    // offset_[i] applies in [trans_[i-1], trans_[i]); offset_.size() ==
    // trans_.size() + 1, the last entry applying after the final transition.
    std::vector<std::int64_t> trans_;
    std::vector<std::int32_t> offsets_;
};

} // namespace gridforge
