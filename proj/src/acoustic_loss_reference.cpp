#include <algorithm>
#include <cmath>

#include "edittrace/acoustic_loss.hpp"

namespace edittrace::reference {

namespace {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
  return s;
}

}  // namespace

LossResult consistency_loss(const FeatureSequence& seq, const LossConfig& cfg) {
  cfg.validate();
  const FeatureMatrix& f = seq.values;
  if (f.rows() == 0 || f.cols() == 0) throw std::invalid_argument("feature sequence must be at least 1 x 1");
  const std::size_t L = f.rows();
  const std::size_t d = f.cols();
  const double eps = cfg.epsilon;

  std::vector<double> c(d, 0.0);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < d; ++j) c[j] += f(i, j);
  for (double& v : c) v /= static_cast<double>(L);
  const double c_norm = std::sqrt(dot(c, c));
  const double b = std::max(c_norm, eps);

  LossResult out;
  out.distances.resize(L);
  std::vector<double> a(L), s(L);
  for (std::size_t i = 0; i < L; ++i) {
    a[i] = std::max(std::sqrt(dot(f.row(i), f.row(i))), eps);
    s[i] = dot(f.row(i), c) / (a[i] * b);
    out.distances[i] = 1.0 - s[i];
  }

  std::vector<double> w(L, 0.0);
  if (seq.label == AudioLabel::BonaFide) {
    std::size_t top = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      sum += out.distances[i];
      if (out.distances[i] > out.distances[top]) top = i;
    }
    out.value = sum / static_cast<double>(L) + out.distances[top];
    for (std::size_t i = 0; i < L; ++i) w[i] = 1.0 / static_cast<double>(L);
    w[top] += 1.0;
  } else {
    out.topk_indices = select_topk(out.distances, topk_count(L, cfg.topk_fraction));
    const double k = static_cast<double>(out.topk_indices.size());
    out.value = 0.0;
    for (std::size_t i : out.topk_indices) {
      if (cfg.margin - out.distances[i] > 0.0) {
        out.value += (cfg.margin - out.distances[i]) / k;
        w[i] = -1.0 / k;
      }
    }
  }

  // value = sum_i w_i (1 - s_i); accumulate ds_i/df_i directly and ds_i/dc
  // into a centroid gradient that is spread evenly over all frames.
  out.gradient = FeatureMatrix(L, d);
  std::vector<double> dc(d, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    if (w[i] == 0.0) continue;
    const double fi_norm = std::sqrt(dot(f.row(i), f.row(i)));
    for (std::size_t j = 0; j < d; ++j) {
      double ds_df = c[j] / (a[i] * b);
      if (fi_norm > eps) ds_df -= s[i] * f(i, j) / (a[i] * a[i]);
      out.gradient(i, j) -= w[i] * ds_df;
      double ds_dc = f(i, j) / (a[i] * b);
      if (c_norm > eps) ds_dc -= s[i] * c[j] / (b * b);
      dc[j] -= w[i] * ds_dc;
    }
  }
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < d; ++j) out.gradient(i, j) += dc[j] / static_cast<double>(L);
  return out;
}

}  // namespace edittrace::reference
