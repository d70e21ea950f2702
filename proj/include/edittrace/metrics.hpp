#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edittrace/answer_contract.hpp"

namespace edittrace {

// label 1 = edited (positive), 0 = bona fide (negative).
struct ScoreRecord {
  std::string id;
  double score = 0.0;
  int label = 0;
};

struct LocalizationRecord {
  std::string id;
  std::vector<double> word_scores;
  std::vector<int> word_labels;
  // nullopt when the model answer broke the output contract
  std::optional<std::string> predicted_words;
  std::string truth_words;
};

struct MetricCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t trials = 0;
  std::size_t violations = 0;  // answers excluded from the thresholded metrics
};

/// Ranking metrics are nullopt when one class is absent; `notes` says why.
struct MetricsReport {
  std::string granularity;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::optional<double> eer;
  std::optional<double> exact_match;
  MetricCounts counts;
  double threshold = 0.5;
  std::vector<std::string> notes;
};

enum class MetricsErrorKind { DegenerateLabels, EmptyInput, MissingScore, LengthMismatch, NonFiniteScore };

class MetricsError : public std::runtime_error {
 public:
  MetricsError(MetricsErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  MetricsErrorKind kind() const { return kind_; }

 private:
  MetricsErrorKind kind_;
};

/// Thresholds at every unique score plus +inf; an input scoring >= t is
/// accepted as edited. FAR(t) = negatives accepted / N, FRR(t) = positives
/// rejected / P. Returns the rate where the curves cross, interpolating
/// linearly between the two operating points that bracket the crossing.
double eer(const std::vector<ScoreRecord>& records);

/// Mann-Whitney: (pairs with positive > negative + half the ties) / (P N).
double auc(const std::vector<ScoreRecord>& records);

/// 2 * (pairs won) + (pairs tied), the exact numerator of auc over 2 P N.
long long auc_twice_wins(const std::vector<ScoreRecord>& records);

struct ThresholdMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

ThresholdMetrics f1_accuracy(const std::vector<ScoreRecord>& records, double threshold);

// Accuracy/F1 from hard predictions (1 = edited).
ThresholdMetrics confusion_metrics(const std::vector<std::pair<int, int>>& predicted_truth);

struct DetectionItem {
  std::string id;
  // nullopt marks a contract violation
  std::optional<EditResponse> parsed;
  std::optional<double> score;
  int truth = 0;
};

/// Accuracy/F1 from parsed verdicts (violations excluded and counted),
/// AUC/EER from the continuous utterance scores.
MetricsReport detection_eval(const std::vector<DetectionItem>& items);

/// Pooled word-level trials across utterances for every metric, plus the
/// exact-match rate of predicted against true words.
MetricsReport localization_eval(const std::vector<LocalizationRecord>& records, double threshold = 0.5);

// Collapses whitespace runs and trims, for exact-match comparison.
std::string normalize_words(std::string_view s);

}  // namespace edittrace
