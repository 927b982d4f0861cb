#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "gucci/nn_core.hpp"
#include "gucci/rng.hpp"

namespace gucci {

/// Fresh uniform alpha draws per anchor for every evaluation.
struct MonteCarlo {
  int samples_per_anchor = 1;
  bool operator==(const MonteCarlo&) const = default;
};

/// Midpoint nodes alpha_i = (i + 0.5) / points.
struct FixedGrid {
  int points = 11;
  bool operator==(const FixedGrid&) const = default;
};

using AlphaMode = std::variant<MonteCarlo, FixedGrid>;

struct ConnectivitySpec {
  double beta = 0.5;
  AlphaMode alpha_mode = MonteCarlo{1};

  void validate() const;
  bool operator==(const ConnectivitySpec&) const = default;
};

struct SamSpec {
  double rho = 0.05;

  void validate() const;
  bool operator==(const SamSpec&) const = default;
};

/// Loss and gradient of some objective at a parameter point.
using Objective = std::function<LossGrad(const ParamVector&)>;

/// Interpolation weights per anchor: result[j] lists the alphas used with anchor j.
/// FixedGrid consumes no randomness.
std::vector<std::vector<double>> draw_alphas(const AlphaMode& mode, std::size_t num_anchors,
                                             Rng& rng);

/// beta / |A| * sum_j mean_alpha L(alpha w + (1 - alpha) a_j) with fixed alphas.
/// The gradient carries the chain-rule factor alpha; anchors get no gradient.
LossGrad connectivity_loss_grad_at(const ParamVector& w, std::span<const ParamVector> anchors,
                                   const Objective& base, double beta,
                                   const std::vector<std::vector<double>>& alphas);

LossGrad connectivity_loss_grad(const ParamVector& w, std::span<const ParamVector> anchors,
                                const Objective& base, const ConnectivitySpec& cspec, Rng& rng);

/// Network form: the base loss is `loss` on `batch`.
LossGrad connectivity_loss_grad(const ParamVector& w, std::span<const ParamVector> anchors,
                                const ModelSpec& spec, const Batch& batch,
                                const ConnectivitySpec& cspec, Rng& rng,
                                const LossKind& loss = CrossEntropy{});

/// (mu / 2) * ||w - w_ref||^2 and mu * (w - w_ref).
LossGrad proximal_grad(const ParamVector& w, const ParamVector& w_ref, double mu);

/// w - lr * grad. Throws DivergenceError on a non-finite gradient.
ParamVector sgd_step(const ParamVector& w, const ParamVector& grad, double lr);

/// Sharpness-aware step: eps = rho * g / ||g|| at w (zero when g = 0), then
/// w - lr * grad(w + eps). Calls grad_fn exactly twice.
ParamVector sam_step(const ParamVector& w, const Objective& grad_fn, const SamSpec& sspec,
                     double lr);

}  // namespace gucci
