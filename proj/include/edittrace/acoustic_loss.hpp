#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace edittrace {

/// Dense row-major L x d matrix; row i is frame i.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class AudioLabel { BonaFide, Edited };

AudioLabel parse_audio_label(std::string_view name);
std::string_view audio_label_name(AudioLabel label);

struct FeatureSequence {
  FeatureMatrix values;
  AudioLabel label = AudioLabel::BonaFide;
};

struct LossConfig {
  double margin = 0.9;
  double topk_fraction = 0.1;
  double lambda = 0.5;
  double epsilon = 1e-8;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct LossResult {
  double value = 0.0;
  FeatureMatrix gradient;
  std::vector<double> distances;
  // Selected frames in descending-distance order; empty for bona fide input.
  std::vector<std::size_t> topk_indices;
};

std::vector<double> centroid(const FeatureMatrix& f);

/// Cosine distance of every frame to the centroid, norms floored at epsilon.
std::vector<double> frame_distances(const FeatureMatrix& f, double epsilon = 1e-8);

/// max(1, ceil(fraction * L)), never above L.
std::size_t topk_count(std::size_t frames, double fraction);

// Indices of the k largest distances, ties to the lower index.
std::vector<std::size_t> select_topk(std::span<const double> distances, std::size_t k);

/// Cohesion loss (mean + max distance) for bona fide input, top-k hinge
/// dispersion loss for edited input, with the exact gradient. The centroid
/// is differentiated through, not treated as a constant. Subgradients:
/// the first argmax takes the max term, ReLU'(0) = 0, top-k membership is
/// the forward-pass selection.
LossResult consistency_loss(const FeatureSequence& f, const LossConfig& cfg);

namespace reference {
// Single-threaded textbook evaluation, kept as the cross-check for the
// parallel kernel.
LossResult consistency_loss(const FeatureSequence& f, const LossConfig& cfg);
}  // namespace reference

class UnstableSelection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinates whose step had to be shrunk to keep the selection fixed.
  std::size_t shrunk_steps = 0;
};

/// Central differences over every coordinate, compared with the analytic
/// gradient as max |g - g_fd| / max(|g_fd|, 1e-8). A step that moves the
/// argmax, the top-k set or the active hinge set is retried at h/10, up to
/// three times, before UnstableSelection is thrown.
GradientCheckReport gradient_check(const FeatureSequence& f, const LossConfig& cfg, double h = 1e-5);

double total_loss(double ce_value, const LossResult& audio, const LossConfig& cfg);

struct DescentPoint {
  int step = 0;
  double value = 0.0;
  double mean_distance = 0.0;
  double topk_mean_distance = 0.0;
};

struct DescentTrace {
  std::vector<DescentPoint> points;  // steps + 1 entries, the first before any update
  FeatureMatrix final_features;
};

/// Plain gradient descent on the consistency loss.
DescentTrace descent_demo(FeatureSequence f, const LossConfig& cfg, int steps, double step_size);

/// Uniform entries in [offset - scale, offset + scale) from a seeded
/// mt19937_64, bit-reproducible across platforms.
FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0,
                              double offset = 0.0);

/// Text format: "L d" on the first line, then L lines of d reals.
FeatureMatrix read_features(std::istream& in);
void write_features(std::ostream& out, const FeatureMatrix& f);

}  // namespace edittrace
