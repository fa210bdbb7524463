#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the rule engines, the relabeler guards and
// the synthetic oracle. Everything here is byte-oriented UTF-8.
namespace agenther::text {

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);

bool is_valid_utf8(std::string_view s);
// Number of Unicode scalar values. Assumes valid UTF-8.
std::size_t utf8_length(std::string_view s);
// Prefix holding at most `max_code_points` scalar values; never splits a
// multi-byte sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_code_points);

// Numbers as written in `s`, in order of appearance, duplicates kept.
//
// Pattern: an optional sign (only when the sign is not glued to a preceding
// letter or digit), then either 1-3 digits followed by one or more ",ddd"
// groups, or a plain digit run; then an optional "." plus at least one
// digit. Currency symbols and unit suffixes are never part of the token, so
// "$5.30/kg" yields "5.30" and "10kg" yields "10".
std::vector<std::string> numeric_tokens(std::string_view s);

// Same, deduplicated by exact string, first occurrence kept.
std::vector<std::string> unique_numeric_tokens(std::string_view s);

// Canonical decimal form used to compare numbers written differently:
// separators and '+' removed, leading integer zeros and trailing fractional
// zeros dropped. "1,200.50" -> "1200.5", "007" -> "7", "-0.0" -> "0".
std::string canonical_number(std::string_view token);

// Parses a token produced by numeric_tokens().
double parse_number(std::string_view token);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
// Maps 64 random bits onto [0, 1) with 53 bits of resolution.
double unit_interval(std::uint64_t bits);
std::string hex64(std::uint64_t v);

std::vector<std::string> split_words(std::string_view s);

}  // namespace agenther::text
