#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emm {

// Decodes the UTF-8 sequence starting at str[pos] and advances pos past it.
// Malformed bytes decode as U+FFFD and advance by one byte.
char32_t utf8_next(std::string_view str, std::size_t& pos);

// Number of Unicode scalar values in str.
std::size_t utf8_length(std::string_view str);

void utf8_append(std::string& out, char32_t cp);

std::string_view trim_whitespace(std::string_view s);

// ASCII case folding; other codepoints pass through unchanged.
std::string to_lower(std::string_view s);

bool is_ascii_alnum(char32_t cp);
// Letters outside ASCII (Latin-1 supplement and Latin Extended) count as word
// characters so accented words survive tokenization.
bool is_word_char(char32_t cp);
bool is_currency(char32_t cp);
bool is_emoji(char32_t cp);
bool is_ascii_digit(char32_t cp);

std::vector<std::string> whitespace_tokens(std::string_view text);

// Lowercased maximal runs of word characters. If strip_urls is set, URL
// tokens are removed before splitting so their fragments don't leak in.
std::vector<std::string> word_tokens(std::string_view text, bool strip_urls = false);

bool looks_like_url(std::string_view token);
bool looks_like_mention(std::string_view token);

// Text with URL tokens removed, remaining tokens joined by single spaces.
std::string strip_url_tokens(std::string_view text);

}  // namespace emm
