#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace grad::utf8 {

struct Decoded {
  char32_t code_point;
  std::size_t length;
};

// Decodes one UTF-8 sequence at `pos`; nullopt for malformed input
// (bad lead byte, truncated, overlong, surrogate, or > U+10FFFF).
inline std::optional<Decoded> decode(std::string_view s, std::size_t pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  unsigned char lead = byte(pos);
  if (lead < 0x80) return Decoded{lead, 1};

  std::size_t len;
  char32_t cp;
  char32_t min;
  if ((lead & 0xE0) == 0xC0) {
    len = 2, cp = lead & 0x1F, min = 0x80;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3, cp = lead & 0x0F, min = 0x800;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4, cp = lead & 0x07, min = 0x10000;
  } else {
    return std::nullopt;
  }
  if (pos + len > s.size()) return std::nullopt;
  for (std::size_t i = 1; i < len; ++i) {
    unsigned char c = byte(pos + i);
    if ((c & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (c & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  return Decoded{cp, len};
}

inline bool is_valid(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    auto d = decode(s, pos);
    if (!d) return false;
    pos += d->length;
  }
  return true;
}

// Unicode White_Space property.
constexpr bool is_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

constexpr bool is_ascii_punct(char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

// Malformed bytes are treated as non-space and kept inside words.
inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t start = 0;
  bool in_word = false;
  for (std::size_t pos = 0; pos < s.size();) {
    auto d = decode(s, pos);
    std::size_t len = d ? d->length : 1;
    bool space = d && is_space(d->code_point);
    if (space && in_word) {
      words.push_back(s.substr(start, pos - start));
      in_word = false;
    } else if (!space && !in_word) {
      start = pos;
      in_word = true;
    }
    pos += len;
  }
  if (in_word) words.push_back(s.substr(start));
  return words;
}

}  // namespace grad::utf8
