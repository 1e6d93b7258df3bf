#include "emm/text.hpp"

#include <cctype>

namespace emm {

char32_t utf8_next(std::string_view str, std::size_t& pos) {
  const auto byte = [&](std::size_t i) -> std::uint8_t {
    return static_cast<std::uint8_t>(str[i]);
  };
  const std::uint8_t b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
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
    ++pos;
    return 0xFFFD;
  }
  if (pos + static_cast<std::size_t>(len) > str.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i < len; ++i) {
    const std::uint8_t b = byte(pos + static_cast<std::size_t>(i));
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

std::size_t utf8_length(std::string_view str) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < str.size()) {
    utf8_next(str, pos);
    ++n;
  }
  return n;
}

void utf8_append(std::string& out, char32_t cp) {
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

std::string_view trim_whitespace(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
         (cp >= 'A' && cp <= 'Z');
}

bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_word_char(char32_t cp) {
  if (is_ascii_alnum(cp)) return true;
  // Latin-1 supplement letters and Latin Extended-A/B, minus × and ÷.
  if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
  return false;
}

bool is_currency(char32_t cp) {
  if (cp == 0x24) return true;                   // $
  if (cp >= 0xA2 && cp <= 0xA5) return true;     // cent, pound, currency, yen
  if (cp >= 0x20A0 && cp <= 0x20CF) return true; // currency symbols block
  return false;
}

bool is_emoji(char32_t cp) {
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return true;  // pictographs, emoticons
  if (cp >= 0x2600 && cp <= 0x27BF) return true;    // misc symbols, dingbats
  if (cp >= 0x2B00 && cp <= 0x2BFF) return true;    // arrows and symbols
  return false;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

bool looks_like_url(std::string_view token) {
  const std::string lower = to_lower(token);
  return lower.starts_with("http://") || lower.starts_with("https://") ||
         lower.starts_with("www.");
}

bool looks_like_mention(std::string_view token) {
  return token.size() > 1 && token[0] == '@';
}

std::string strip_url_tokens(std::string_view text) {
  std::string out;
  for (const auto& tok : whitespace_tokens(text)) {
    if (looks_like_url(tok)) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view text, bool strip_urls) {
  std::string buffer;
  if (strip_urls) {
    buffer = strip_url_tokens(text);
    text = buffer;
  }
  std::vector<std::string> out;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = utf8_next(text, pos);
    if (is_word_char(cp)) {
      char32_t folded = cp;
      if (cp >= 'A' && cp <= 'Z') folded = cp + 32;
      utf8_append(current, folded);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace emm
