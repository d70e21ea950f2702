#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edittrace {

enum class Language { English, Chinese };

// "en" / "zh". Throws std::invalid_argument on anything else.
Language parse_language(std::string_view code);
std::string_view language_code(Language lang);

/// An ordered list of non-empty tokens plus the language that decides how
/// they are split and joined. English tokens are whitespace-delimited words
/// (punctuation stays attached, no case folding); Chinese tokens are single
/// code points.
class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::vector<std::string> tokens, Language lang);

  static TokenSequence tokenize(std::string_view text, Language lang);

  std::string join() const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  Language language() const { return lang_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<std::string> tokens_;
  Language lang_ = Language::English;
};

// Joins a token span with the separator appropriate for `lang`.
std::string join_tokens(const std::vector<std::string>& tokens, Language lang);

}  // namespace edittrace
