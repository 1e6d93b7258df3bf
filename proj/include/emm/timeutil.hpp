#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace emm {

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int year, int month, int day);
void civil_from_days(std::int64_t days, int& year, int& month, int& day);

// Accepts YYYY-MM-DD[Thh:mm:ss[.fff][Z|±hh[:]mm]]. Fractional seconds are
// truncated. Missing zone means UTC.
std::optional<std::int64_t> parse_iso8601(std::string_view s);

std::string format_iso8601(std::int64_t utc_seconds);
std::string format_iso_date(std::int64_t utc_seconds);

// Floor division/modulo so pre-epoch timestamps bucket correctly.
std::int64_t floor_div(std::int64_t a, std::int64_t b);
std::int64_t floor_mod(std::int64_t a, std::int64_t b);

// Midnight of the UTC civil day containing ts.
std::int64_t utc_day_start(std::int64_t ts);

}  // namespace emm
