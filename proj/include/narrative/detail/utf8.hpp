#pragma once

#include <array>
#include <string>
#include <string_view>

#include "narrative/error.hpp"

namespace narrative::detail {

// Strict UTF-8 decoding: rejects overlong forms, surrogates and truncated
// sequences. `where` is folded into the error message.
inline std::u32string decode_utf8(std::string_view in) {
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  auto fail = [&](const char* why) {
    throw DecodeError("invalid UTF-8 at byte " + std::to_string(i) + ": " + why);
  };
  while (i < in.size()) {
    const auto b0 = static_cast<unsigned char>(in[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      fail("bad lead byte");
    }
    if (i + len > in.size()) fail("truncated sequence");
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(in[i + k]);
      if ((b & 0xC0) != 0x80) fail("bad continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) fail("overlong encoding");
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid code point");
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
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

inline std::string encode_utf8(std::u32string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char32_t cp : in) append_utf8(out, cp);
  return out;
}

// Base-letter folding for Latin-1 Supplement and Latin Extended-A.
// Returns the ASCII spelling ("e" for U+00E9, "ae" for U+00E6), or an empty
// view when the code point is not a Latin letter.
inline std::string_view fold_latin(char32_t cp) {
  if (cp < 0x80) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) {
      static constexpr std::string_view kAscii =
          "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
      return cp <= 'Z' ? kAscii.substr(cp - 'A', 1) : kAscii.substr(26 + cp - 'a', 1);
    }
    return {};
  }
  // 0xC0..0xFF; '.' marks a non-letter.
  static constexpr std::array<std::string_view, 64> kLatin1 = {
      "A", "A", "A", "A", "A",  "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
      "D", "N", "O", "O", "O",  "O", "O",  ".", "O", "U", "U", "U", "U", "Y", "TH", "ss",
      "a", "a", "a", "a", "a",  "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
      "d", "n", "o", "o", "o",  "o", "o",  ".", "o", "u", "u", "u", "u", "y", "th", "y"};
  // 0x100..0x17F, one char each except the ligature slots '1'..'4'.
  static constexpr std::string_view kExtA =
      "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIi12JjKkkLlLlLlLlLlNnNnNnnNnOoOoOo34"
      "RrRrRrSsSsSsSsTtTtTtUuUuUuUuUuUuWwYyYZzZzZzs";
  static_assert(kExtA.size() == 128);
  if (cp >= 0xC0 && cp <= 0xFF) {
    auto s = kLatin1[cp - 0xC0];
    return s == "." ? std::string_view{} : s;
  }
  if (cp >= 0x100 && cp <= 0x17F) {
    const char c = kExtA[cp - 0x100];
    switch (c) {
      case '1': return "IJ";
      case '2': return "ij";
      case '3': return "OE";
      case '4': return "oe";
      default: return kExtA.substr(cp - 0x100, 1);
    }
  }
  return {};
}

inline bool is_letter(char32_t cp) { return !fold_latin(cp).empty(); }

inline bool is_lower_letter(char32_t cp) {
  auto f = fold_latin(cp);
  return !f.empty() && f[0] >= 'a' && f[0] <= 'z';
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0 || cp == 0x2009 || cp == 0x202F || cp == 0x3000;
}

inline std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace narrative::detail
