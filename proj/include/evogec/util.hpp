#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace evogec {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 14695981039346656037ULL);

// splitmix64 finalizer; derives decorrelated rng streams from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

// Modulo draw. The bias is negligible for a 64-bit engine and small n, and the
// result is identical on every platform, unlike std::uniform_int_distribution.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n);

std::string to_lower_ascii(std::string_view text);
std::string_view trim_ws(std::string_view text);
std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view text, std::string_view prefix);

std::string read_text_file(const std::filesystem::path& path);  // DataError when unreadable
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string hex64(std::uint64_t value);
std::string format_double(double value, int decimals);

}  // namespace evogec
