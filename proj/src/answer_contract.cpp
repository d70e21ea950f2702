#include "edittrace/answer_contract.hpp"

#include <algorithm>
#include <cctype>

namespace edittrace {

PromptStrategy parse_strategy(std::string_view name) {
  if (name == "generic") return PromptStrategy::Generic;
  if (name == "descriptive") return PromptStrategy::Descriptive;
  if (name == "detailed") return PromptStrategy::Detailed;
  throw std::invalid_argument("unknown prompt strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(PromptStrategy s) {
  switch (s) {
    case PromptStrategy::Generic: return "generic";
    case PromptStrategy::Descriptive: return "descriptive";
    case PromptStrategy::Detailed: return "detailed";
  }
  return "?";
}

namespace {

constexpr std::string_view kDefaultSystem =
    "You are Qwen, a virtual human developed by the Qwen Team, Alibaba Group, capable of perceiving "
    "auditory and visual inputs, as well as generating text and speech.";

constexpr std::string_view kTaskDefinition =
    "You are an expert in speech forensics. Your task is speech editing detection: decide whether the "
    "given speech has been partially edited, meaning that some words were added, deleted or modified "
    "while the rest of the utterance was left untouched, and if so, identify the edited words.";

constexpr std::string_view kQuestion =
    "Listen to the audio carefully. Has this speech been edited? If it has, which words were edited "
    "and how?";

std::string detailed_system() {
  std::string s(kTaskDefinition);
  s += "\n\nEdit types:\n"
       "- added: new words were inserted into the original speech.\n"
       "- deleted: words were removed from the original speech.\n"
       "- modified: words of the original speech were replaced with new words.\n"
       "\nOutput requirements:\n"
       "- If the speech is bona fide, output exactly: ";
  s += kBonaFideAnswer;
  s += "\n- If the speech is edited, output exactly: ";
  s += kEditedAnswerTemplate;
  s += "\n- <exact words> are the edited words as they are spoken; <type> is one of added, deleted, "
       "modified.\n"
       "- Output a single sentence and nothing else.";
  return s;
}

std::string_view trim(std::string_view s) {
  auto sp = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && sp(s.front())) s.remove_prefix(1);
  while (!s.empty() && sp(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

PromptBundle build_prompt(PromptStrategy strategy, const std::optional<std::string>& prior) {
  PromptBundle out;
  switch (strategy) {
    case PromptStrategy::Generic:
      out.system = kDefaultSystem;
      break;
    case PromptStrategy::Descriptive:
      out.system = std::string(kTaskDefinition) + " Answer in one short sentence.";
      break;
    case PromptStrategy::Detailed:
      out.system = detailed_system();
      break;
  }
  out.user = kQuestion;
  if (prior) {
    out.user += "\n\n";
    out.user += *prior;
  }
  return out;
}

std::string_view edit_type_name(EditType t) {
  switch (t) {
    case EditType::Added: return "added";
    case EditType::Deleted: return "deleted";
    case EditType::Modified: return "modified";
  }
  return "?";
}

EditType edit_type_of(EditOperation op) {
  switch (op) {
    case EditOperation::Add: return EditType::Added;
    case EditOperation::Delete: return EditType::Deleted;
    case EditOperation::Modify: return EditType::Modified;
  }
  return EditType::Modified;
}

const char* to_string(ParseErrorKind kind) {
  return kind == ParseErrorKind::UnrecognizedTemplate ? "UnrecognizedTemplate" : "UnknownEditType";
}

EditResponse parse_response(std::string_view text) {
  constexpr std::string_view kPrefix = "Yes, ";
  constexpr std::string_view kSuffix = " in the speech.";
  constexpr std::string_view kWas = " was ";

  const std::string_view s = trim(text);
  if (s == kBonaFideAnswer) return {};

  if (s.size() < kPrefix.size() + kSuffix.size() || !s.starts_with(kPrefix) || !s.ends_with(kSuffix))
    throw ParseError(ParseErrorKind::UnrecognizedTemplate, "answer matches neither output template");
  const std::string_view body = s.substr(kPrefix.size(), s.size() - kPrefix.size() - kSuffix.size());
  const auto was = body.rfind(kWas);
  if (was == std::string_view::npos || was == 0)
    throw ParseError(ParseErrorKind::UnrecognizedTemplate, "edited answer lacks '<words> was <type>'");
  const std::string_view words = body.substr(0, was);
  const std::string_view keyword = body.substr(was + kWas.size());
  if (trim(words).size() != words.size() || keyword.empty() ||
      std::any_of(keyword.begin(), keyword.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
    throw ParseError(ParseErrorKind::UnrecognizedTemplate, "malformed edited-words or type field");

  std::string lower(keyword);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  EditResponse r;
  r.verdict = Verdict::Edited;
  r.edited_words = std::string(words);
  if (lower == "added")
    r.edit_type = EditType::Added;
  else if (lower == "deleted")
    r.edit_type = EditType::Deleted;
  else if (lower == "modified")
    r.edit_type = EditType::Modified;
  else
    throw ParseError(ParseErrorKind::UnknownEditType, "unknown edit type '" + std::string(keyword) + "'");
  return r;
}

std::string serialize_response(const EditResponse& response) {
  if (response.verdict == Verdict::BonaFide) return std::string(kBonaFideAnswer);
  if (response.edited_words.empty() || !response.edit_type)
    throw std::invalid_argument("edited response needs words and a type");
  return "Yes, " + response.edited_words + " was " + std::string(edit_type_name(*response.edit_type)) +
         " in the speech.";
}

std::string label_words(const EditPlan& plan, Language lang) {
  return join_tokens(plan.operation == EditOperation::Delete ? plan.removed : plan.inserted, lang);
}

std::string serialize_label(const std::optional<EditPlan>& plan, Language lang) {
  if (!plan) return std::string(kBonaFideAnswer);
  EditResponse r;
  r.verdict = Verdict::Edited;
  r.edited_words = label_words(*plan, lang);
  r.edit_type = edit_type_of(plan->operation);
  return serialize_response(r);
}

}  // namespace edittrace
