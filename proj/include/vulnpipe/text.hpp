#pragma once

// Small string helpers shared across modules.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vulnpipe {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix) noexcept;

/// Replaces ill-formed UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view s);

/// 1234567 -> "1,234,567".
std::string with_thousands(std::uint64_t n);
/// Fixed-point rendering with round-half-away-from-zero.
std::string fixed(double value, int decimals);

/// RFC 4180 field quoting, only when needed.
std::string csv_field(std::string_view s);

/// Current UTC time as RFC 3339 with milliseconds.
std::string utc_timestamp();

/// Deterministic 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;
/// FNV-1a over bytes; used to derive per-group seeds.
std::uint64_t fnv1a(std::string_view s) noexcept;

}  // namespace vulnpipe
