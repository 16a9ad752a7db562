#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by every module.
namespace tabrag::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// Longest suffix of `s` holding at most `n` code points.
std::string_view utf8_tail(std::string_view s, std::size_t n);

// Maximal runs of non-whitespace bytes.
std::vector<std::string_view> whitespace_words(std::string_view s);
std::size_t count_words(std::string_view s);

// Lowercased runs of letters/digits (plus any non-ASCII byte). Everything
// else separates tokens.
std::vector<std::string> word_tokens(std::string_view s);

bool is_word_byte(unsigned char c);

bool ends_with_period(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace tabrag::text
