#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "gucci/nn_core.hpp"

namespace gucci {

/// Loss and accuracy along w(alpha) = alpha * w1 + (1 - alpha) * w2.
/// alpha = 0 is the w2 end, alpha = 1 the w1 end.
struct SweepResult {
  std::vector<double> alphas;
  std::vector<double> losses;
  std::vector<double> accuracies;
};

struct BarrierValue {
  double barrier = 0.0;
  double argmax_alpha = 0.0;
};

struct BarrierReport {
  double loss_barrier = 0.0;
  double acc_barrier = 0.0;
  double argmax_alpha_loss = 0.0;
  double argmax_alpha_acc = 0.0;
  SweepResult sweep;
};

struct GroupBarrier {
  double loss_barrier = 0.0;
  double acc_barrier = 0.0;
};

/// Evaluates a parameter point; lets barrier code run on closed-form losses
/// as well as on networks.
using PointEvaluator = std::function<EvalResult(const ParamVector&)>;

/// Evaluator bound to a network and dataset.
PointEvaluator network_evaluator(const ModelSpec& spec, const Batch& data);

inline constexpr std::size_t kDefaultSweepPoints = 21;

/// Evaluates at alpha_i = i / (num_points - 1). Points are evaluated in
/// parallel and stored by index.
SweepResult sweep(const ParamVector& w1, const ParamVector& w2, const PointEvaluator& eval,
                  std::size_t num_points = kDefaultSweepPoints);
SweepResult sweep(const ParamVector& w1, const ParamVector& w2, const ModelSpec& spec,
                  const Batch& data, std::size_t num_points = kDefaultSweepPoints);

/// max_i L(alpha_i) - [alpha_i L(1) + (1 - alpha_i) L(0)]; ties go to the smallest alpha.
BarrierValue loss_barrier(const SweepResult& sweep);

/// max_i 1 - A(alpha_i) / [alpha_i A(1) + (1 - alpha_i) A(0)]; ties go to the
/// smallest alpha. Throws DegenerateAccuracyError on a zero denominator.
BarrierValue accuracy_barrier(const SweepResult& sweep);

BarrierReport barrier_report(SweepResult sweep);

/// L(mean) - mean L_i and 1 - A(mean) / mean A_i over K >= 2 models.
GroupBarrier group_barrier(std::span<const ParamVector> models, const PointEvaluator& eval);
GroupBarrier group_barrier(std::span<const ParamVector> models, const ModelSpec& spec,
                           const Batch& data);

/// 2-D slice through three models with w1 at the origin.
struct LandscapeGrid {
  ParamVector origin;
  ParamVector axis_u;  // unit vector along w2 - w1
  ParamVector axis_v;  // unit vector, orthogonal part of w3 - w1
  std::size_t resolution = 0;
  std::vector<double> xs;  // column coordinates
  std::vector<double> ys;  // row coordinates
  std::vector<double> losses;      // resolution x resolution, row-major (row = y)
  std::vector<double> accuracies;  // same layout
  std::vector<std::array<double, 2>> marker_coords;  // w1, w2, w3
  std::vector<EvalResult> marker_values;  // evaluated at the mapped-back marker coordinates

  ParamVector to_params(double x, double y) const;
};

/// Gram-Schmidt plane through w1, w2, w3; the grid spans the markers'
/// bounding box widened by `padding` times its extent on each side.
/// Throws DomainError if the three models are (nearly) collinear.
LandscapeGrid plane_grid(const ParamVector& w1, const ParamVector& w2, const ParamVector& w3,
                         const PointEvaluator& eval, std::size_t resolution, double padding);
LandscapeGrid plane_grid(const ParamVector& w1, const ParamVector& w2, const ParamVector& w3,
                         const ModelSpec& spec, const Batch& data, std::size_t resolution,
                         double padding);

// ---------------------------------------------------------------------------
// Closed-form bounds for two-layer ReLU networks.

struct BoundInputs {
  std::size_t h = 1;  // hidden width
  std::size_t l = 1;  // input dimension
  double b = 1.0;     // input norm bound
  double delta = 0.5;
  double d_eps = 1.0;
  double d_anc = 0.0;
  std::size_t K = 2;
  double gamma = 0.0;
  double Gamma = 0.0;
  double d_eps_shifted = 1.0;  // sublevel-set diameter at level eps + gamma * Gamma^2
};

enum class BoundKind { Pair, Group };

/// d_eps / (1 - delta)^(1/S).
double lemma1_max_halfwidth(double d_eps, double delta, std::size_t S);

/// Pair:  sqrt(2h) b / (2 (1-delta)^(2/(hl+h))) * d (d + d_anc) * ln(12h/delta), d = d_eps
/// Group: same prefactor with d = d_eps_shifted and ln(4 h K^2 / delta).
double barrier_upper_bound(BoundKind kind, const BoundInputs& in);

}  // namespace gucci
