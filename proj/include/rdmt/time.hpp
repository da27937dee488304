#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace rdmt {

// UTC instants are stored as seconds since the Unix epoch. Sub-second
// precision in the input is truncated.
using Instant = std::int64_t;

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;

// Parses an RFC 3339 timestamp ("2017-03-04T05:06:07Z", optional
// fractional seconds, 'Z' or +-hh:mm offset). Returns nullopt on any
// syntax or range violation.
std::optional<Instant> parse_rfc3339(const std::string& s);

// Formats as "YYYY-MM-DDThh:mm:ssZ".
std::string format_rfc3339(Instant t);

}  // namespace rdmt
