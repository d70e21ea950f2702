#include "edittrace/tokens.hpp"

#include <algorithm>

namespace edittrace {

Language parse_language(std::string_view code) {
  if (code == "en") return Language::English;
  if (code == "zh") return Language::Chinese;
  throw std::invalid_argument("unknown language code '" + std::string(code) + "'");
}

std::string_view language_code(Language lang) {
  return lang == Language::English ? "en" : "zh";
}

TokenSequence::TokenSequence(std::vector<std::string> tokens, Language lang)
    : tokens_(std::move(tokens)), lang_(lang) {
  if (std::any_of(tokens_.begin(), tokens_.end(), [](const std::string& t) { return t.empty(); }))
    throw std::invalid_argument("token sequence contains an empty token");
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length of the UTF-8 sequence introduced by lead byte `c`. Invalid lead
// bytes are treated as single-byte so malformed input still tokenizes.
std::size_t utf8_length(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

TokenSequence TokenSequence::tokenize(std::string_view text, Language lang) {
  std::vector<std::string> out;
  if (lang == Language::English) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      if (j > i) out.emplace_back(text.substr(i, j - i));
      i = j;
    }
  } else {
    std::size_t i = 0;
    while (i < text.size()) {
      if (is_space(text[i])) {
        ++i;
        continue;
      }
      std::size_t n = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
  }
  return TokenSequence(std::move(out), lang);
}

std::string join_tokens(const std::vector<std::string>& tokens, Language lang) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && lang == Language::English) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string TokenSequence::join() const { return join_tokens(tokens_, lang_); }

}  // namespace edittrace
