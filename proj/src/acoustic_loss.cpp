#include "edittrace/acoustic_loss.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace edittrace {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw std::invalid_argument("feature data does not match its shape");
}

FeatureMatrix::FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged feature rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

AudioLabel parse_audio_label(std::string_view name) {
  if (name == "bonafide") return AudioLabel::BonaFide;
  if (name == "edited") return AudioLabel::Edited;
  throw std::invalid_argument("unknown audio label '" + std::string(name) + "'");
}

std::string_view audio_label_name(AudioLabel label) {
  return label == AudioLabel::BonaFide ? "bonafide" : "edited";
}

void LossConfig::validate() const {
  if (!(margin > 0.0 && margin <= 2.0)) throw std::invalid_argument("margin must lie in (0, 2]");
  if (!(topk_fraction > 0.0 && topk_fraction <= 1.0)) throw std::invalid_argument("topk fraction must lie in (0, 1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
}

std::size_t topk_count(std::size_t frames, double fraction) {
  // 1e-9 absorbs products like 0.1 * 30 landing a hair above an integer.
  const double raw = std::ceil(fraction * static_cast<double>(frames) - 1e-9);
  std::size_t k = raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
  return std::min(k, std::max<std::size_t>(frames, 1));
}

std::vector<std::size_t> select_topk(std::span<const double> distances, std::size_t k) {
  std::vector<std::size_t> idx(distances.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return distances[a] > distances[b] || (distances[a] == distances[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

namespace {

void require_shape(const FeatureMatrix& f) {
  if (f.rows() == 0 || f.cols() == 0) throw std::invalid_argument("feature sequence must be at least 1 x 1");
}

// Per-frame forward quantities shared by the value and the gradient.
struct Forward {
  std::vector<double> c;
  double c_norm = 0.0;
  double b = 0.0;                  // max(|c|, eps)
  std::vector<double> norm;        // |f_i|
  std::vector<double> a;           // max(|f_i|, eps)
  std::vector<double> similarity;  // s_i
  std::vector<double> distance;    // 1 - s_i
};

// Every reduction below runs in a fixed order independent of the thread
// count, so results are bit-identical for any OMP_NUM_THREADS.
Forward forward(const FeatureMatrix& f, double eps) {
  const auto L = static_cast<std::ptrdiff_t>(f.rows());
  const auto d = static_cast<std::ptrdiff_t>(f.cols());
  Forward fw;
  fw.c.assign(f.cols(), 0.0);
  const double inv_l = 1.0 / static_cast<double>(L);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < L; ++i) s += f(i, j);
    fw.c[j] = s * inv_l;
  }
  double cc = 0.0;
  for (double v : fw.c) cc += v * v;
  fw.c_norm = std::sqrt(cc);
  fw.b = std::max(fw.c_norm, eps);

  fw.norm.resize(L);
  fw.a.resize(L);
  fw.similarity.resize(L);
  fw.distance.resize(L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < L; ++i) {
    auto row = f.row(i);
    double ff = 0.0, fc = 0.0;
    for (std::ptrdiff_t j = 0; j < d; ++j) {
      ff += row[j] * row[j];
      fc += row[j] * fw.c[j];
    }
    fw.norm[i] = std::sqrt(ff);
    fw.a[i] = std::max(fw.norm[i], eps);
    fw.similarity[i] = fc / (fw.a[i] * fw.b);
    fw.distance[i] = 1.0 - fw.similarity[i];
  }
  return fw;
}

std::size_t first_argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> centroid(const FeatureMatrix& f) {
  require_shape(f);
  return forward(f, 1e-8).c;
}

std::vector<double> frame_distances(const FeatureMatrix& f, double epsilon) {
  require_shape(f);
  return forward(f, epsilon).distance;
}

LossResult consistency_loss(const FeatureSequence& seq, const LossConfig& cfg) {
  cfg.validate();
  const FeatureMatrix& f = seq.values;
  require_shape(f);
  const std::size_t L = f.rows();
  const std::size_t d = f.cols();
  Forward fw = forward(f, cfg.epsilon);

  LossResult out;
  // weight[i] = dValue / dd_i
  std::vector<double> weight(L, 0.0);
  const double inv_l = 1.0 / static_cast<double>(L);
  if (seq.label == AudioLabel::BonaFide) {
    double sum = 0.0;
    for (double di : fw.distance) sum += di;
    const std::size_t top = first_argmax(fw.distance);
    out.value = sum * inv_l + fw.distance[top];
    std::fill(weight.begin(), weight.end(), inv_l);
    weight[top] += 1.0;
  } else {
    out.topk_indices = select_topk(fw.distance, topk_count(L, cfg.topk_fraction));
    const double inv_k = 1.0 / static_cast<double>(out.topk_indices.size());
    double sum = 0.0;
    for (std::size_t i : out.topk_indices) {
      const double gap = cfg.margin - fw.distance[i];
      if (gap > 0.0) {
        sum += gap;
        weight[i] = -inv_k;
      }
    }
    out.value = sum * inv_k;
  }

  // dd_i/dc = -(f_i / (a_i b) - s_i c / b^2); the second term vanishes when
  // the centroid norm is floored.
  const bool c_free = fw.c_norm > cfg.epsilon;
  std::vector<double> grad_c(d, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(d); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      if (weight[i] == 0.0) continue;
      double e = f(i, j) / (fw.a[i] * fw.b);
      if (c_free) e -= fw.similarity[i] * fw.c[j] / (fw.b * fw.b);
      acc -= weight[i] * e;
    }
    grad_c[j] = acc * inv_l;
  }

  out.gradient = FeatureMatrix(L, d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(L); ++i) {
    auto g = out.gradient.row(i);
    auto row = f.row(i);
    const double w = weight[i];
    const bool f_free = fw.norm[i] > cfg.epsilon;
    for (std::size_t j = 0; j < d; ++j) {
      double direct = 0.0;
      if (w != 0.0) {
        direct = fw.c[j] / (fw.a[i] * fw.b);
        if (f_free) direct -= fw.similarity[i] * row[j] / (fw.a[i] * fw.a[i]);
      }
      g[j] = -w * direct + grad_c[j];
    }
  }
  out.distances = std::move(fw.distance);
  return out;
}

namespace {

// The finite-difference side re-evaluates the forward pass in extended
// precision: at h = 1e-5 a double loss value carries ~1e-11 of rounding
// noise into the quotient, which swamps coordinates with |g| near 1e-7.
using Extended = long double;

std::vector<Extended> extended_distances(const FeatureMatrix& f, double eps) {
  const std::size_t L = f.rows(), d = f.cols();
  std::vector<Extended> c(d, 0.0L);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < d; ++j) c[j] += f(i, j);
  Extended cc = 0.0L;
  for (auto& v : c) {
    v /= static_cast<Extended>(L);
    cc += v * v;
  }
  const Extended b = std::max(std::sqrt(cc), static_cast<Extended>(eps));
  std::vector<Extended> dist(L);
  for (std::size_t i = 0; i < L; ++i) {
    Extended ff = 0.0L, fc = 0.0L;
    for (std::size_t j = 0; j < d; ++j) {
      ff += static_cast<Extended>(f(i, j)) * f(i, j);
      fc += static_cast<Extended>(f(i, j)) * c[j];
    }
    dist[i] = 1.0L - fc / (std::max(std::sqrt(ff), static_cast<Extended>(eps)) * b);
  }
  return dist;
}

template <typename T>
std::vector<std::size_t> topk_of(const std::vector<T>& dist, std::size_t k) {
  std::vector<std::size_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] > dist[b] || (dist[a] == dist[b] && a < b); });
  idx.resize(k);
  return idx;
}

struct Selection {
  std::size_t argmax = 0;
  std::vector<std::size_t> topk;
  std::vector<bool> active;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct Probe {
  Selection selection;
  Extended value = 0.0L;
};

Probe probe_loss(const FeatureSequence& seq, const LossConfig& cfg) {
  const auto dist = extended_distances(seq.values, cfg.epsilon);
  Probe p;
  if (seq.label == AudioLabel::BonaFide) {
    p.selection.argmax = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    Extended sum = 0.0L;
    for (auto di : dist) sum += di;
    p.value = sum / static_cast<Extended>(dist.size()) + dist[p.selection.argmax];
    return p;
  }
  auto topk = topk_of(dist, topk_count(dist.size(), cfg.topk_fraction));
  Extended sum = 0.0L;
  for (std::size_t i : topk) sum += std::max(0.0L, static_cast<Extended>(cfg.margin) - dist[i]);
  p.value = sum / static_cast<Extended>(topk.size());
  std::sort(topk.begin(), topk.end());
  for (std::size_t i : topk) p.selection.active.push_back(static_cast<Extended>(cfg.margin) - dist[i] > 0.0L);
  p.selection.topk = std::move(topk);
  return p;
}

}  // namespace

GradientCheckReport gradient_check(const FeatureSequence& seq, const LossConfig& cfg, double h) {
  cfg.validate();
  require_shape(seq.values);
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const LossResult analytic = consistency_loss(seq, cfg);
  const Selection base = probe_loss(seq, cfg).selection;
  const auto n = static_cast<std::ptrdiff_t>(seq.values.data().size());

  GradientCheckReport report;
  report.coordinates = static_cast<std::size_t>(n);
  double worst = 0.0;
  std::size_t shrunk = 0;
  bool unstable = false;

#pragma omp parallel
  {
    FeatureSequence probe = seq;
    double local_worst = 0.0;
    std::size_t local_shrunk = 0;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      auto x = probe.values.data();
      const double x0 = x[k];
      double step = h;
      double fd = 0.0;
      bool ok = false;
      for (int attempt = 0; attempt <= 3 && !ok; ++attempt, step /= 10.0) {
        const double xp = x0 + step;
        const double xm = x0 - step;
        x[k] = xp;
        const Probe plus = probe_loss(probe, cfg);
        x[k] = xm;
        const Probe minus = probe_loss(probe, cfg);
        x[k] = x0;
        if (plus.selection == base && minus.selection == base) {
          fd = static_cast<double>((plus.value - minus.value) / static_cast<Extended>(xp - xm));
          ok = true;
          if (attempt > 0) ++local_shrunk;
        }
      }
      if (!ok) {
#pragma omp atomic write
        unstable = true;
        continue;
      }
      const double g = analytic.gradient.data()[k];
      local_worst = std::max(local_worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-8));
    }
#pragma omp critical
    {
      worst = std::max(worst, local_worst);
      shrunk += local_shrunk;
    }
  }
  if (unstable) throw UnstableSelection("selection changes under every tried finite-difference step");
  report.max_relative_error = worst;
  report.shrunk_steps = shrunk;
  return report;
}

double total_loss(double ce_value, const LossResult& audio, const LossConfig& cfg) {
  return ce_value + cfg.lambda * audio.value;
}

DescentTrace descent_demo(FeatureSequence f, const LossConfig& cfg, int steps, double step_size) {
  if (steps < 1) throw std::invalid_argument("descent demo needs at least one step");
  if (!(step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  const std::size_t k = topk_count(f.values.rows(), cfg.topk_fraction);

  DescentTrace trace;
  trace.points.reserve(static_cast<std::size_t>(steps) + 1);
  auto record = [&](int step, const LossResult& r) {
    DescentPoint p;
    p.step = step;
    p.value = r.value;
    double sum = 0.0;
    for (double di : r.distances) sum += di;
    p.mean_distance = sum / static_cast<double>(r.distances.size());
    double top = 0.0;
    for (std::size_t i : select_topk(r.distances, k)) top += r.distances[i];
    p.topk_mean_distance = top / static_cast<double>(k);
    trace.points.push_back(p);
  };

  for (int step = 0; step < steps; ++step) {
    LossResult r = consistency_loss(f, cfg);
    record(step, r);
    auto x = f.values.data();
    auto g = r.gradient.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step_size * g[i];
  }
  record(steps, consistency_loss(f, cfg));
  trace.final_features = std::move(f.values);
  return trace;
}

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale,
                              double offset) {
  std::mt19937_64 rng(seed);
  FeatureMatrix m(rows, cols);
  for (double& v : m.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    v = offset + scale * (2.0 * u - 1.0);
  }
  return m;
}

FeatureMatrix read_features(std::istream& in) {
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw std::invalid_argument("feature file must start with 'L d'");
  if (rows == 0 || cols == 0) throw std::invalid_argument("feature file declares an empty matrix");
  FeatureMatrix m(rows, cols);
  for (double& v : m.data()) {
    if (!(in >> v)) throw std::invalid_argument("feature file has fewer values than L * d");
    if (!std::isfinite(v)) throw std::invalid_argument("feature file contains a non-finite value");
  }
  std::string extra;
  if (in >> extra) throw std::invalid_argument("feature file has more values than L * d");
  return m;
}

void write_features(std::ostream& out, const FeatureMatrix& f) {
  out << f.rows() << ' ' << f.cols() << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = 0; j < f.cols(); ++j) out << (j ? " " : "") << f(i, j);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace edittrace
