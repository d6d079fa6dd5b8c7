#include "intentsynth/text.hpp"

#include <cstdio>

namespace intentsynth::text {

std::u32string decode_utf8(std::string_view input) {
  std::u32string out;
  out.reserve(input.size());
  std::size_t i = 0;
  const auto n = input.size();
  while (i < n) {
    const auto lead = static_cast<unsigned char>(input[i]);
    char32_t cp = 0;
    std::size_t extra = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k <= extra; ++k) {
      if (i + k >= n) {
        ok = false;
        break;
      }
      const auto cont = static_cast<unsigned char>(input[i + k]);
      if ((cont & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    if (!ok) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_utf8(std::u32string_view input) {
  std::string out;
  out.reserve(input.size());
  for (char32_t cp : input) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

char32_t fold_char(char32_t c) {
  if (c >= U'A' && c <= U'Z')
    return c + 0x20;
  if (c < 0xC0)
    return c;
  if (c <= 0xDE && c != 0xD7)
    return c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130)
      return U'i';
    if (c == 0x178)
      return 0xFF;
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E))
      return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x138 || c == 0x149 || c == 0x17F)
      return c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2)
    return c + 0x20;
  if (c >= 0x410 && c <= 0x42F)
    return c + 0x20;
  if (c >= 0x400 && c <= 0x40F)
    return c + 0x50;
  if (c == 0x1E9E)
    return 0xDF;
  return c;
}

std::string casefold(std::string_view input) {
  auto cps = decode_utf8(input);
  for (auto &c : cps)
    c = fold_char(c);
  return encode_utf8(cps);
}

bool is_space(char32_t c) {
  switch (c) {
  case U' ':
  case U'\t':
  case U'\n':
  case U'\r':
  case U'\v':
  case U'\f':
  case 0x85:
  case 0xA0:
  case 0x1680:
  case 0x2028:
  case 0x2029:
  case 0x202F:
  case 0x205F:
  case 0x3000:
    return true;
  default:
    return c >= 0x2000 && c <= 0x200A;
  }
}

std::string collapse_whitespace(std::string_view input) {
  const auto cps = decode_utf8(input);
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t c : cps) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space)
      out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return encode_utf8(out);
}

std::vector<std::string> split_whitespace(std::string_view input) {
  std::vector<std::string> tokens;
  const auto collapsed = collapse_whitespace(input);
  std::size_t start = 0;
  while (start < collapsed.size()) {
    auto end = collapsed.find(' ', start);
    if (end == std::string::npos)
      end = collapsed.size();
    tokens.emplace_back(collapsed.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

} // namespace intentsynth::text
