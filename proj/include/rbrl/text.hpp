#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rbrl {

std::string trim(const std::string& s);
std::string to_lower(const std::string& s);
bool contains_ci(const std::string& haystack, const std::string& needle);
std::vector<std::string> split_lines(const std::string& s);

// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string s, const std::string& from, const std::string& to);

// All base-10 integers appearing in the text, in order.
std::vector<long long> extract_integers(const std::string& s);

// All decimal numbers (integer or fractional) appearing in the text, in order.
std::vector<double> extract_numbers(const std::string& s);

// First integer following `marker` (case-insensitive), if any.
std::optional<long long> integer_after(const std::string& text, const std::string& marker);

// First number following `marker` (case-insensitive), if any.
std::optional<double> number_after(const std::string& text, const std::string& marker);

// Shortest round-trippable decimal rendering of a double (printf %.17g with
// a fixed-format pass first), used everywhere doubles are serialized to text.
std::string format_double(double x);

// Fixed-precision rendering used in prose (state descriptors, reports).
std::string format_fixed(double x, int decimals);

// SHA-256 of a byte string, rendered as lowercase hex.
std::string sha256_hex(const std::string& data);

}  // namespace rbrl
