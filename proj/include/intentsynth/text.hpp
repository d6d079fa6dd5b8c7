#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the parser, dedup keys, embeddings and error rates.
namespace intentsynth::text {

// Invalid byte sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view input);
std::string encode_utf8(std::u32string_view input);

// Simple case folding for Latin scripts (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic).
char32_t fold_char(char32_t c);
std::string casefold(std::string_view input);

bool is_space(char32_t c);

// Trim outer whitespace and collapse interior runs to one ASCII space.
std::string collapse_whitespace(std::string_view input);

std::vector<std::string> split_whitespace(std::string_view input);

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

} // namespace intentsynth::text
