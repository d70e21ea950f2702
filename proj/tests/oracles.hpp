#pragma once

// Brute-force reference computations for the tests. Everything here is
// written from the definitions, without calling into the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "edittrace/acoustic_loss.hpp"
#include "edittrace/edit_plan.hpp"
#include "edittrace/metrics.hpp"

namespace oracle {

// ---- word diff ----------------------------------------------------------

// Moves in enumeration order: delete a source token, insert a target token,
// match equal tokens.
enum class Move { Del, Ins, Match };

struct Alignment {
  std::vector<Move> moves;
  std::size_t matches = 0;
  std::size_t hunks = 0;
};

inline std::size_t count_hunks(const std::vector<Move>& moves) {
  std::size_t hunks = 0;
  bool in_gap = false;
  for (Move m : moves) {
    if (m == Move::Match) {
      in_gap = false;
    } else if (!in_gap) {
      ++hunks;
      in_gap = true;
    }
  }
  return hunks;
}

// Walks every alignment depth-first and keeps the first one with the most
// matches, then the fewest hunks.
inline void enumerate(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t i,
                      std::size_t j, std::vector<Move>& path, std::size_t matches, Alignment& best, bool& have) {
  if (i == a.size() && j == b.size()) {
    const std::size_t h = count_hunks(path);
    if (!have || matches > best.matches || (matches == best.matches && h < best.hunks)) {
      best = {path, matches, h};
      have = true;
    }
    return;
  }
  if (i < a.size()) {
    path.push_back(Move::Del);
    enumerate(a, b, i + 1, j, path, matches, best, have);
    path.pop_back();
  }
  if (j < b.size()) {
    path.push_back(Move::Ins);
    enumerate(a, b, i, j + 1, path, matches, best, have);
    path.pop_back();
  }
  if (i < a.size() && j < b.size() && a[i] == b[j]) {
    path.push_back(Move::Match);
    enumerate(a, b, i + 1, j + 1, path, matches + 1, best, have);
    path.pop_back();
  }
}

inline std::vector<edittrace::DiffHunk> best_diff(const std::vector<std::string>& a,
                                                  const std::vector<std::string>& b) {
  Alignment best;
  bool have = false;
  std::vector<Move> path;
  enumerate(a, b, 0, 0, path, 0, best, have);

  std::vector<edittrace::DiffHunk> hunks;
  std::size_t i = 0, j = 0;
  bool open = false;
  for (Move m : best.moves) {
    if (m == Move::Match) {
      open = false;
      ++i;
      ++j;
      continue;
    }
    if (!open) {
      hunks.push_back({i, i, j, j});
      open = true;
    }
    if (m == Move::Del) hunks.back().src_end = ++i;
    else hunks.back().tgt_end = ++j;
  }
  return hunks;
}

// Memoized recursion on suffixes; cheap enough for the acceptance sizes
// where full enumeration is not.
inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) return 0;
    int& m = memo[i][j];
    if (m < 0) m = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

// ---- ranking metrics ----------------------------------------------------

struct Trial {
  double score;
  int label;
};

inline std::vector<Trial> trials_of(const std::vector<edittrace::ScoreRecord>& records) {
  std::vector<Trial> t;
  for (const auto& r : records) t.push_back({r.score, r.label});
  return t;
}

// Threshold sweep with direct counting at every unique score and +inf.
// The crossing point is formed as one integer ratio and divided once.
inline double eer(const std::vector<Trial>& trials) {
  long long P = 0, N = 0;
  for (const auto& t : trials) (t.label ? P : N) += 1;

  std::vector<double> thresholds;
  for (const auto& t : trials) thresholds.push_back(t.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(INFINITY);

  std::vector<std::pair<long long, long long>> curve;  // (false accepts, false rejects)
  for (double th : thresholds) {
    long long fa = 0, fr = 0;
    for (const auto& t : trials) {
      const bool accepted = t.score >= th;
      if (accepted && !t.label) ++fa;
      if (!accepted && t.label) ++fr;
    }
    curve.emplace_back(fa, fr);
  }

  // FAR - FRR scaled by P N
  auto gap = [&](std::size_t k) { return curve[k].first * P - curve[k].second * N; };
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const long long g = gap(k);
    if (g == 0) return static_cast<double>(curve[k].first) / static_cast<double>(N);
    if (g < 0) {
      // k > 0 here: the first point accepts everything, so its gap is P N.
      const long long g0 = gap(k - 1);
      const long long fa0 = curve[k - 1].first, fa1 = curve[k].first;
      // FAR at the root of the linear gap between the two points.
      const long long num = fa0 * (g0 - g) + (fa1 - fa0) * g0;
      const long long den = N * (g0 - g);
      return static_cast<double>(num) / static_cast<double>(den);
    }
  }
  return NAN;
}

// 2 * wins + ties over every (positive, negative) pair.
inline long long auc_twice_wins(const std::vector<Trial>& trials) {
  long long twice = 0;
  for (const auto& p : trials) {
    if (!p.label) continue;
    for (const auto& n : trials) {
      if (n.label) continue;
      if (p.score > n.score) twice += 2;
      else if (p.score == n.score) twice += 1;
    }
  }
  return twice;
}

inline double auc(const std::vector<Trial>& trials) {
  long long P = 0, N = 0;
  for (const auto& t : trials) (t.label ? P : N) += 1;
  return static_cast<double>(auc_twice_wins(trials)) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

// ---- consistency loss ---------------------------------------------------

// Loss value evaluated from scratch in long double: centroid, cosine
// distances, then the bona fide or edited objective.
inline long double loss_value(const edittrace::FeatureMatrix& f, edittrace::AudioLabel label,
                              const edittrace::LossConfig& cfg) {
  using LD = long double;
  const std::size_t L = f.rows(), d = f.cols();
  std::vector<LD> c(d, 0.0L);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t k = 0; k < d; ++k) c[k] += f(i, k);
  for (auto& x : c) x /= static_cast<LD>(L);
  LD cn = 0;
  for (auto x : c) cn += x * x;
  cn = std::max<LD>(std::sqrt(cn), cfg.epsilon);

  std::vector<LD> dist(L);
  for (std::size_t i = 0; i < L; ++i) {
    LD dot = 0, fn = 0;
    for (std::size_t k = 0; k < d; ++k) {
      dot += f(i, k) * c[k];
      fn += static_cast<LD>(f(i, k)) * f(i, k);
    }
    fn = std::max<LD>(std::sqrt(fn), cfg.epsilon);
    dist[i] = 1.0L - dot / (fn * cn);
  }

  if (label == edittrace::AudioLabel::BonaFide) {
    LD mean = 0, mx = dist[0];
    for (auto x : dist) {
      mean += x;
      mx = std::max(mx, x);
    }
    return mean / static_cast<LD>(L) + mx;
  }
  std::size_t k = static_cast<std::size_t>(std::ceil(cfg.topk_fraction * static_cast<double>(L) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, L);
  std::vector<LD> sorted = dist;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  LD sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += std::max<LD>(0.0L, static_cast<LD>(cfg.margin) - sorted[i]);
  return sum / static_cast<LD>(k);
}

// ---- prior aggregation --------------------------------------------------

inline double frame_mean(const std::vector<double>& probs) {
  long double s = 0;
  for (double p : probs) s += p;
  return static_cast<double>(s / static_cast<long double>(probs.size()));
}

}  // namespace oracle
