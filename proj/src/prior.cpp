#include "edittrace/prior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace edittrace {

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::Mean;
  if (name == "max") return Aggregation::Max;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "'");
}

std::string_view aggregation_name(Aggregation a) { return a == Aggregation::Mean ? "mean" : "max"; }

ScoreReduction parse_reduction(std::string_view name) {
  if (name == "max") return ScoreReduction::Max;
  if (name == "mean") return ScoreReduction::Mean;
  throw std::invalid_argument("unknown score reduction '" + std::string(name) + "'");
}

std::vector<WordPrior> aggregate(const FrameProbSeq& frames, const std::vector<WordBoundary>& boundaries,
                                 Aggregation method) {
  if (!(frames.frame_shift_ms > 0.0) || !std::isfinite(frames.frame_shift_ms))
    throw PriorError(PriorErrorKind::InvalidFrameShift, "frame shift must be positive");
  for (double p : frames.probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw PriorError(PriorErrorKind::InvalidProbability,
                       "frame probability outside [0, 1] in '" + frames.utterance_id + "'");
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    const auto& b = boundaries[k];
    if (!(b.start >= 0.0 && b.start < b.end))
      throw PriorError(PriorErrorKind::InvalidBoundary, "word '" + b.word + "' has start >= end or start < 0");
    if (k > 0) {
      const auto& prev = boundaries[k - 1];
      if (b.start < prev.start)
        throw PriorError(PriorErrorKind::UnsortedBoundaries, "word boundaries are not sorted by start");
      if (b.start < prev.end)
        throw PriorError(PriorErrorKind::OverlappingBoundaries,
                         "words '" + prev.word + "' and '" + b.word + "' overlap");
    }
  }

  std::vector<WordPrior> out(boundaries.size());
  const double shift_s = frames.frame_shift_ms / 1000.0;
  std::size_t word = 0;
  for (std::size_t i = 0; i < frames.probs.size() && word < boundaries.size(); ++i) {
    const double center = (static_cast<double>(i) + 0.5) * shift_s;
    while (word < boundaries.size() && center >= boundaries[word].end) ++word;
    if (word == boundaries.size()) break;
    if (center < boundaries[word].start) continue;  // silence
    WordPrior& wp = out[word];
    const double p = frames.probs[i];
    if (method == Aggregation::Mean)
      wp.probability += p;
    else
      wp.probability = wp.frame_count == 0 ? p : std::max(wp.probability, p);
    ++wp.frame_count;
  }

  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    out[k].word = boundaries[k].word;
    if (out[k].frame_count == 0)
      throw PriorError(PriorErrorKind::EmptyWord,
                       "word '" + boundaries[k].word + "' covers no frame center in '" + frames.utterance_id + "'");
    if (method == Aggregation::Mean) out[k].probability /= static_cast<double>(out[k].frame_count);
  }
  return out;
}

int round_hundredths(double p) {
  // Slack of 1e-9 hundredths so decimal halves like 0.005 round up even
  // though their binary value sits just below the half.
  return static_cast<int>(std::floor(p * 100.0 + 0.5 + 1e-9));
}

std::string format_prior_prompt(const std::vector<WordPrior>& priors) {
  if (priors.empty()) throw PriorError(PriorErrorKind::EmptyPriors, "no word priors to format");
  std::string out(kPriorPromptHeader);
  for (const auto& wp : priors) {
    const int h = round_hundredths(wp.probability);
    char digits[16];
    std::snprintf(digits, sizeof digits, "%d.%02d", h / 100, h % 100);
    out += ' ';
    out += wp.word;
    out += "(p=";
    out += digits;
    out += ')';
  }
  return out;
}

std::vector<ParsedPriorWord> parse_prior_prompt(std::string_view prompt) {
  if (prompt.substr(0, kPriorPromptHeader.size()) != kPriorPromptHeader)
    throw PriorError(PriorErrorKind::MalformedPrompt, "prior prompt header missing");
  std::string_view rest = prompt.substr(kPriorPromptHeader.size());
  std::vector<ParsedPriorWord> out;
  while (!rest.empty()) {
    if (rest.front() != ' ') throw PriorError(PriorErrorKind::MalformedPrompt, "expected a space separator");
    rest.remove_prefix(1);
    auto close = rest.find(')');
    // Entries end at ")" followed by a space or the end of the text.
    while (close != std::string_view::npos && close + 1 < rest.size() && rest[close + 1] != ' ')
      close = rest.find(')', close + 1);
    if (close == std::string_view::npos) throw PriorError(PriorErrorKind::MalformedPrompt, "unterminated entry");
    std::string_view entry = rest.substr(0, close + 1);
    auto open = entry.rfind("(p=");
    if (open == std::string_view::npos || open == 0)
      throw PriorError(PriorErrorKind::MalformedPrompt, "entry lacks '(p='");
    std::string_view num = entry.substr(open + 3, entry.size() - open - 4);
    if (num.size() != 4 || num[1] != '.' || !std::isdigit(static_cast<unsigned char>(num[0])) ||
        !std::isdigit(static_cast<unsigned char>(num[2])) || !std::isdigit(static_cast<unsigned char>(num[3])))
      throw PriorError(PriorErrorKind::MalformedPrompt, "probability is not of the form D.DD");
    out.push_back({std::string(entry.substr(0, open)), (num[0] - '0') * 100 + (num[2] - '0') * 10 + (num[3] - '0')});
    rest.remove_prefix(close + 1);
  }
  return out;
}

double utterance_score(const std::vector<WordPrior>& priors, ScoreReduction reduction) {
  if (priors.empty()) throw PriorError(PriorErrorKind::EmptyPriors, "no word priors to score");
  if (reduction == ScoreReduction::Max) {
    double best = priors.front().probability;
    for (const auto& wp : priors) best = std::max(best, wp.probability);
    return best;
  }
  double sum = 0.0;
  for (const auto& wp : priors) sum += wp.probability;
  return sum / static_cast<double>(priors.size());
}

std::vector<std::pair<std::string, std::vector<WordBoundary>>> parse_ctm(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<WordBoundary>>> out;
  std::unordered_map<std::string, std::size_t> index;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string id, channel, word;
    double start = 0.0, dur = 0.0;
    if (!(fields >> id)) continue;  // blank
    if (!(fields >> channel >> start >> dur >> word))
      throw std::invalid_argument("malformed CTM line " + std::to_string(line_no));
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) out.emplace_back(id, std::vector<WordBoundary>{});
    out[it->second].second.push_back({word, start, start + dur});
  }
  return out;
}

}  // namespace edittrace
