#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "edittrace/edit_plan.hpp"
#include "edittrace/tokens.hpp"

namespace edittrace {

enum class PromptStrategy { Generic, Descriptive, Detailed };

PromptStrategy parse_strategy(std::string_view name);
std::string_view strategy_name(PromptStrategy s);

struct PromptBundle {
  std::string system;
  std::string user;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

inline constexpr std::string_view kBonaFideAnswer = "No evidence of speech editing was detected.";
inline constexpr std::string_view kEditedAnswerTemplate = "Yes, <exact words> was <type> in the speech.";

/// Generic: stock assistant system prompt, question in the user turn.
/// Descriptive: system prompt defines the task and asks for a short answer.
/// Detailed: system prompt also lists the edit types and the exact answer
/// templates. A prior prompt, when given, becomes the last user paragraph.
PromptBundle build_prompt(PromptStrategy strategy, const std::optional<std::string>& prior = std::nullopt);

enum class Verdict { BonaFide, Edited };
enum class EditType { Added, Deleted, Modified };

std::string_view edit_type_name(EditType t);  // "added" / "deleted" / "modified"
EditType edit_type_of(EditOperation op);

struct EditResponse {
  Verdict verdict = Verdict::BonaFide;
  std::string edited_words;
  std::optional<EditType> edit_type;

  friend bool operator==(const EditResponse&, const EditResponse&) = default;
};

enum class ParseErrorKind { UnrecognizedTemplate, UnknownEditType };

const char* to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Strict template match after trimming outer whitespace. The type keyword
/// is case-insensitive; everything else, edited words included, must match
/// exactly.
EditResponse parse_response(std::string_view text);

std::string serialize_response(const EditResponse& response);

/// Ground-truth answer for a plan; no plan means bona fide. Modify reports
/// the inserted (audible) words.
std::string serialize_label(const std::optional<EditPlan>& plan, Language lang = Language::English);

// The words a plan's label reports.
std::string label_words(const EditPlan& plan, Language lang = Language::English);

}  // namespace edittrace
