#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gucci/losses.hpp"
#include "gucci/matrix.hpp"

namespace gucci {

enum class Activation { ReLU };

/// Fully connected ReLU network: widths = [input, hidden..., classes].
struct ModelSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::ReLU;
  bool bias = true;

  /// Throws DomainError unless there are >= 2 widths, all >= 1.
  void validate() const;

  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }

  /// S = sum over layers of in*out + out*[bias].
  std::size_t param_count() const;

  /// Offset of layer k's weight block in the flat vector; its bias block
  /// (when present) follows immediately.
  std::size_t weight_offset(std::size_t layer) const;

  bool operator==(const ModelSpec&) const = default;
};

/// Flat parameter vector in layer-major order, weights (out x in, row-major)
/// before biases within each layer.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }

  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;
};

/// n x l inputs with n labels in [0, C).
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// Copy of the selected rows, in the given order.
  Batch gather(std::span<const std::size_t> rows) const;
};

/// Loss value and gradient with respect to the parameters.
struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Glorot-uniform draw per layer, a = sqrt(6 / (fan_in + fan_out)), biases
/// included. Deterministic in (spec, seed).
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

Matrix forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs);

/// Mean loss over the batch and its exact gradient by backpropagation.
LossGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                       const LossKind& loss = CrossEntropy{});

/// Mean cross-entropy and accuracy; argmax ties go to the lowest class index.
EvalResult evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& data);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> row);

// Parameter-space arithmetic. All throw ShapeError on length mismatch.

/// alpha * w1 + (1 - alpha) * w2.
ParamVector combine(const ParamVector& w1, const ParamVector& w2, double alpha);
ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector subtract(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& a, double s);
/// a += s * b
void axpy(ParamVector& a, double s, const ParamVector& b);
double dot(const ParamVector& a, const ParamVector& b);
double norm2(const ParamVector& a);
/// Uniform average of one or more equally sized vectors.
ParamVector mean(std::span<const ParamVector> models);

void check_same_size(const ParamVector& a, const ParamVector& b);

}  // namespace gucci
