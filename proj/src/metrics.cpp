#include "edittrace/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace edittrace {

namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts count_classes(const std::vector<ScoreRecord>& records) {
  ClassCounts c;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw MetricsError(MetricsErrorKind::NonFiniteScore, "score of '" + r.id + "' is not finite");
    (r.label ? c.positives : c.negatives) += 1;
  }
  if (c.positives == 0 || c.negatives == 0)
    throw MetricsError(MetricsErrorKind::DegenerateLabels,
                       c.positives == 0 ? "no positive (edited) trials" : "no negative (bona fide) trials");
  return c;
}

// Records sorted by ascending score, as (score, label).
std::vector<std::pair<double, int>> sorted_scores(const std::vector<ScoreRecord>& records) {
  std::vector<std::pair<double, int>> v;
  v.reserve(records.size());
  for (const auto& r : records) v.emplace_back(r.score, r.label ? 1 : 0);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double eer(const std::vector<ScoreRecord>& records) {
  const ClassCounts cc = count_classes(records);
  const auto P = static_cast<long long>(cc.positives);
  const auto N = static_cast<long long>(cc.negatives);
  const auto v = sorted_scores(records);

  // Operating point at threshold t: (false accepts, false rejects).
  long long prev_fa = N, prev_fr = 0;  // lowest threshold accepts everything
  long long neg_below = 0, pos_below = 0;
  std::size_t i = 0;
  while (true) {
    long long fa, fr;
    if (i < v.size()) {
      fa = N - neg_below;
      fr = pos_below;
      const double t = v[i].first;
      while (i < v.size() && v[i].first == t) {
        (v[i].second ? pos_below : neg_below) += 1;
        ++i;
      }
    } else {
      fa = 0;
      fr = P;
    }
    // sign of FAR - FRR, exactly
    const long long diff = fa * P - fr * N;
    if (diff <= 0) {
      if (diff == 0) return static_cast<double>(fa) / static_cast<double>(N);
      // Crossing of the segment between the previous point and this one,
      // kept as one integer ratio so there is a single rounding step.
      __extension__ using Wide = __int128;
      const Wide d0 = static_cast<Wide>(prev_fa) * P - static_cast<Wide>(prev_fr) * N;
      const Wide d1 = diff;
      const Wide num = static_cast<Wide>(prev_fa) * (-d1) + d0 * fa;
      const Wide den = static_cast<Wide>(N) * (d0 - d1);
      return static_cast<double>(num) / static_cast<double>(den);
    }
    prev_fa = fa;
    prev_fr = fr;
  }
}

long long auc_twice_wins(const std::vector<ScoreRecord>& records) {
  count_classes(records);
  const auto v = sorted_scores(records);
  long long twice = 0, neg_below = 0;
  for (std::size_t i = 0; i < v.size();) {
    long long pos = 0, neg = 0;
    const double t = v[i].first;
    for (; i < v.size() && v[i].first == t; ++i) (v[i].second ? pos : neg) += 1;
    twice += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
  }
  return twice;
}

double auc(const std::vector<ScoreRecord>& records) {
  const ClassCounts cc = count_classes(records);
  return static_cast<double>(auc_twice_wins(records)) /
         (2.0 * static_cast<double>(cc.positives) * static_cast<double>(cc.negatives));
}

ThresholdMetrics confusion_metrics(const std::vector<std::pair<int, int>>& predicted_truth) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (auto [pred, truth] : predicted_truth) {
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  ThresholdMetrics m;
  if (predicted_truth.empty()) return m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predicted_truth.size());
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

ThresholdMetrics f1_accuracy(const std::vector<ScoreRecord>& records, double threshold) {
  std::vector<std::pair<int, int>> pt;
  pt.reserve(records.size());
  for (const auto& r : records) pt.emplace_back(r.score >= threshold ? 1 : 0, r.label ? 1 : 0);
  return confusion_metrics(pt);
}

namespace {

void fill_ranking(MetricsReport& report, const std::vector<ScoreRecord>& trials) {
  try {
    report.auc = auc(trials);
    report.eer = eer(trials);
  } catch (const MetricsError& e) {
    if (e.kind() != MetricsErrorKind::DegenerateLabels) throw;
    report.notes.push_back(std::string("DegenerateLabels: ") + e.what() + "; auc and eer omitted");
  }
}

}  // namespace

MetricsReport detection_eval(const std::vector<DetectionItem>& items) {
  if (items.empty()) throw MetricsError(MetricsErrorKind::EmptyInput, "detection eval needs at least one item");
  MetricsReport report;
  report.granularity = "detection";
  report.notes.push_back("accuracy/f1 from parsed verdicts; auc/eer from continuous utterance scores");

  std::vector<std::pair<int, int>> verdicts;
  std::vector<ScoreRecord> trials;
  for (const auto& item : items) {
    if (!item.score) throw MetricsError(MetricsErrorKind::MissingScore, "no utterance score for '" + item.id + "'");
    trials.push_back({item.id, *item.score, item.truth ? 1 : 0});
    (item.truth ? report.counts.positives : report.counts.negatives) += 1;
    if (!item.parsed) {
      ++report.counts.violations;
      continue;
    }
    verdicts.emplace_back(item.parsed->verdict == Verdict::Edited ? 1 : 0, item.truth ? 1 : 0);
  }
  report.counts.trials = items.size();
  const ThresholdMetrics tm = confusion_metrics(verdicts);
  report.accuracy = tm.accuracy;
  report.f1 = tm.f1;
  fill_ranking(report, trials);
  return report;
}

std::string normalize_words(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += ch;
  }
  return out;
}

MetricsReport localization_eval(const std::vector<LocalizationRecord>& records, double threshold) {
  if (records.empty()) throw MetricsError(MetricsErrorKind::EmptyInput, "localization eval needs at least one record");
  MetricsReport report;
  report.granularity = "localization";
  report.threshold = threshold;
  report.notes.push_back("word-level trials pooled across utterances; exact_match compares answer words");

  std::vector<ScoreRecord> trials;
  std::size_t answered = 0, matched = 0;
  for (const auto& rec : records) {
    if (rec.word_scores.size() != rec.word_labels.size())
      throw MetricsError(MetricsErrorKind::LengthMismatch,
                         "'" + rec.id + "' has " + std::to_string(rec.word_scores.size()) + " scores but " +
                             std::to_string(rec.word_labels.size()) + " labels");
    if (rec.word_scores.empty()) throw MetricsError(MetricsErrorKind::EmptyInput, "'" + rec.id + "' has no words");
    for (std::size_t k = 0; k < rec.word_scores.size(); ++k) {
      const int label = rec.word_labels[k] ? 1 : 0;
      trials.push_back({rec.id, rec.word_scores[k], label});
      (label ? report.counts.positives : report.counts.negatives) += 1;
    }
    if (!rec.predicted_words) {
      ++report.counts.violations;
      continue;
    }
    ++answered;
    if (normalize_words(*rec.predicted_words) == normalize_words(rec.truth_words)) ++matched;
  }
  report.counts.trials = trials.size();
  const ThresholdMetrics tm = f1_accuracy(trials, threshold);
  report.accuracy = tm.accuracy;
  report.f1 = tm.f1;
  if (answered) report.exact_match = static_cast<double>(matched) / static_cast<double>(answered);
  fill_ranking(report, trials);
  return report;
}

}  // namespace edittrace
