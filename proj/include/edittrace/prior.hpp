#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edittrace {

/// Per-frame tampering probabilities from an external frame-level detector.
struct FrameProbSeq {
  std::string utterance_id;
  double frame_shift_ms = 20.0;
  std::vector<double> probs;
};

/// Forced-alignment word span, seconds, half-open [start, end).
struct WordBoundary {
  std::string word;
  double start = 0.0;
  double end = 0.0;
};

struct WordPrior {
  std::string word;
  double probability = 0.0;
  std::size_t frame_count = 0;
};

enum class Aggregation { Mean, Max };

Aggregation parse_aggregation(std::string_view name);
std::string_view aggregation_name(Aggregation a);

enum class PriorErrorKind {
  EmptyWord,
  UnsortedBoundaries,
  OverlappingBoundaries,
  InvalidBoundary,
  InvalidProbability,
  InvalidFrameShift,
  EmptyPriors,
  MalformedPrompt,
};

class PriorError : public std::runtime_error {
 public:
  PriorError(PriorErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  PriorErrorKind kind() const { return kind_; }

 private:
  PriorErrorKind kind_;
};

/// Frame i (center at (i + 0.5) * frame_shift) goes to the word whose
/// [start, end) contains its center. Frames outside every word are silence
/// and are dropped.
std::vector<WordPrior> aggregate(const FrameProbSeq& frames, const std::vector<WordBoundary>& boundaries,
                                 Aggregation method = Aggregation::Mean);

inline constexpr std::string_view kPriorPromptHeader =
    "Word-level editing probabilities from an acoustic detector:";

/// "<header> w1(p=0.XX) w2(p=0.XX) ..." with half-up rounding to hundredths.
std::string format_prior_prompt(const std::vector<WordPrior>& priors);

// Rounds p to hundredths, half-up; returns the integer count of hundredths.
int round_hundredths(double p);

struct ParsedPriorWord {
  std::string word;
  int hundredths = 0;
};

// Inverse of format_prior_prompt up to rounding.
std::vector<ParsedPriorWord> parse_prior_prompt(std::string_view prompt);

enum class ScoreReduction { Max, Mean };

ScoreReduction parse_reduction(std::string_view name);

double utterance_score(const std::vector<WordPrior>& priors, ScoreReduction reduction = ScoreReduction::Max);

/// Parses "id channel start dur word" CTM lines into per-utterance boundary
/// lists, preserving first-appearance order of the ids.
std::vector<std::pair<std::string, std::vector<WordBoundary>>> parse_ctm(std::string_view text);

}  // namespace edittrace
