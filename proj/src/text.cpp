#include "userprof/text.hpp"

#include <memory>

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "userprof/error.hpp"

namespace userprof::text {
namespace {

icu::UnicodeString nfc_folded(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString out = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  out.foldCase();
  // Case folding can denormalize (e.g. U+0345), so normalize once more.
  out = nfc->normalize(out, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  return out;
}

icu::BreakIterator& word_breaker() {
  thread_local std::unique_ptr<icu::BreakIterator> it = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> b(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) throw Error("ICU word break iterator unavailable");
    return b;
  }();
  return *it;
}

}  // namespace

std::string normalize(std::string_view utf8) {
  icu::UnicodeString folded = nfc_folded(utf8);
  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < folded.length();) {
    UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(0x20));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

std::vector<std::string> word_tokens(std::string_view utf8) {
  icu::UnicodeString folded = nfc_folded(utf8);
  icu::BreakIterator& it = word_breaker();
  it.setText(folded);
  std::vector<std::string> tokens;
  int32_t start = it.first();
  for (int32_t end = it.next(); end != icu::BreakIterator::DONE; start = end, end = it.next()) {
    if (it.getRuleStatus() == UBRK_WORD_NONE) continue;
    std::string tok;
    folded.tempSubStringBetween(start, end).toUTF8String(tok);
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::vector<TokenSpan> whitespace_spans(std::string_view s) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  std::size_t tok_begin = std::string_view::npos;
  const auto n = static_cast<int32_t>(s.size());
  while (i < s.size()) {
    int32_t pos = static_cast<int32_t>(i);
    UChar32 c;
    U8_NEXT(s.data(), pos, n, c);
    bool ws = c >= 0 && u_isUWhiteSpace(c);
    if (ws && tok_begin != std::string_view::npos) {
      spans.push_back({tok_begin, i});
      tok_begin = std::string_view::npos;
    } else if (!ws && tok_begin == std::string_view::npos) {
      tok_begin = i;
    }
    i = static_cast<std::size_t>(pos);
  }
  if (tok_begin != std::string_view::npos) spans.push_back({tok_begin, s.size()});
  return spans;
}

std::size_t codepoint_length(std::string_view s) {
  std::size_t count = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace userprof::text
