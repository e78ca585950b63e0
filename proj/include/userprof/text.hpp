#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace userprof::text {

/// NFC normalization, Unicode case folding, whitespace runs collapsed to a
/// single ASCII space, leading/trailing whitespace removed. Input must be UTF-8.
std::string normalize(std::string_view utf8);

/// Word tokens of the normalized text, using Unicode word segmentation.
/// Punctuation and whitespace segments are discarded.
std::vector<std::string> word_tokens(std::string_view utf8);

/// Byte span of a whitespace-delimited token inside its source string.
struct TokenSpan {
  std::size_t begin;
  std::size_t end;
};

/// Whitespace-delimited tokens (ASCII and Unicode White_Space), as byte spans.
std::vector<TokenSpan> whitespace_spans(std::string_view utf8);

/// Number of Unicode code points in a UTF-8 string.
std::size_t codepoint_length(std::string_view utf8);

/// True when `haystack` contains `needle`; both are expected normalized.
inline bool contains(std::string_view haystack, std::string_view needle) {
  return !needle.empty() && haystack.find(needle) != std::string_view::npos;
}

std::string trim(std::string_view s);

}  // namespace userprof::text
