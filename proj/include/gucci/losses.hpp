#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "gucci/matrix.hpp"

namespace gucci {

/// Mean softmax cross-entropy.
struct CrossEntropy {
  bool operator==(const CrossEntropy&) const = default;
};

/// Cross-entropy on logits shifted by per-class calibration offsets
/// (FedLC-style logit calibration). Offsets are z_c - tau * n_c^(-1/4) for
/// classes with n_c > 0 and z_c - 10 * tau * (max n)^(-1/4) for empty classes.
struct CalibratedCE {
  double tau = 0.5;
  std::vector<std::int64_t> class_counts;
  bool operator==(const CalibratedCE&) const = default;
};

using LossKind = std::variant<CrossEntropy, CalibratedCE>;

/// Scalar loss plus its gradient with respect to the logits.
struct LogitLoss {
  double loss = 0.0;
  Matrix grad;
};

/// Mean cross-entropy; grad = (softmax - onehot) / n.
LogitLoss cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Per-class additive logit offsets used by calibrated_cross_entropy.
std::vector<double> calibration_offsets(std::span<const std::int64_t> class_counts, double tau);

LogitLoss calibrated_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                   std::span<const std::int64_t> class_counts, double tau);

/// Dispatches on the loss kind. Throws DomainError for an invalid CalibratedCE.
LogitLoss logit_loss(const LossKind& kind, const Matrix& logits, std::span<const int> labels);

void validate(const LossKind& kind, std::size_t num_classes);

}  // namespace gucci
