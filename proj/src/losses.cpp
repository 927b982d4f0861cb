#include "gucci/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gucci/error.hpp"

namespace gucci {

namespace {

void check_labels(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " != logit rows " +
                     std::to_string(logits.rows));
  }
  if (logits.rows == 0) throw ShapeError("empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.cols) + ")");
    }
  }
}

// Softmax cross-entropy of logits + offset (offset may be empty).
LogitLoss shifted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                std::span<const double> offset) {
  check_labels(logits, labels);
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  const double inv_n = 1.0 / static_cast<double>(n);

  LogitLoss out{0.0, Matrix(n, c)};
  std::vector<double> z(c);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < c; ++k) z[k] = logits(r, k) + (offset.empty() ? 0.0 : offset[k]);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - zmax);
    const double log_norm = zmax + std::log(sum);
    const auto y = static_cast<std::size_t>(labels[r]);
    total += log_norm - z[y];
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(z[k] - log_norm);
      out.grad(r, k) = (p - (k == y ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

}  // namespace

LogitLoss cross_entropy(const Matrix& logits, std::span<const int> labels) {
  return shifted_cross_entropy(logits, labels, {});
}

std::vector<double> calibration_offsets(std::span<const std::int64_t> class_counts, double tau) {
  if (class_counts.empty()) throw DomainError("calibration needs class counts");
  std::int64_t max_count = 0;
  for (auto n : class_counts) {
    if (n < 0) throw DomainError("negative class count");
    max_count = std::max(max_count, n);
  }
  if (max_count == 0) throw DomainError("calibrated cross-entropy: all class counts are zero");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("calibration tau must be >= 0");

  std::vector<double> offsets(class_counts.size());
  const double empty_offset = -10.0 * tau * std::pow(static_cast<double>(max_count), -0.25);
  for (std::size_t k = 0; k < class_counts.size(); ++k) {
    offsets[k] = class_counts[k] > 0
                     ? -tau * std::pow(static_cast<double>(class_counts[k]), -0.25)
                     : empty_offset;
  }
  return offsets;
}

LogitLoss calibrated_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                   std::span<const std::int64_t> class_counts, double tau) {
  if (class_counts.size() != logits.cols) {
    throw ShapeError("class_counts size " + std::to_string(class_counts.size()) +
                     " != class count " + std::to_string(logits.cols));
  }
  const auto offsets = calibration_offsets(class_counts, tau);
  return shifted_cross_entropy(logits, labels, offsets);
}

LogitLoss logit_loss(const LossKind& kind, const Matrix& logits, std::span<const int> labels) {
  if (const auto* cal = std::get_if<CalibratedCE>(&kind)) {
    return calibrated_cross_entropy(logits, labels, cal->class_counts, cal->tau);
  }
  return cross_entropy(logits, labels);
}

void validate(const LossKind& kind, std::size_t num_classes) {
  if (const auto* cal = std::get_if<CalibratedCE>(&kind)) {
    if (cal->class_counts.size() != num_classes) {
      throw ShapeError("class_counts size does not match class count");
    }
    (void)calibration_offsets(cal->class_counts, cal->tau);
  }
}

}  // namespace gucci
