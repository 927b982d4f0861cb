#include "gucci/optim.hpp"

#include <cmath>

#include "gucci/error.hpp"

namespace gucci {

void ConnectivitySpec::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("connectivity beta must be >= 0");
  if (const auto* mc = std::get_if<MonteCarlo>(&alpha_mode)) {
    if (mc->samples_per_anchor < 1) throw DomainError("samples_per_anchor must be >= 1");
  } else if (std::get<FixedGrid>(alpha_mode).points < 1) {
    throw DomainError("grid points must be >= 1");
  }
}

void SamSpec::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("SAM rho must be > 0");
}

std::vector<std::vector<double>> draw_alphas(const AlphaMode& mode, std::size_t num_anchors,
                                             Rng& rng) {
  std::vector<std::vector<double>> alphas(num_anchors);
  if (const auto* grid = std::get_if<FixedGrid>(&mode)) {
    std::vector<double> nodes(static_cast<std::size_t>(grid->points));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      nodes[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(grid->points);
    }
    for (auto& a : alphas) a = nodes;
    return alphas;
  }
  const auto samples = static_cast<std::size_t>(std::get<MonteCarlo>(mode).samples_per_anchor);
  for (auto& a : alphas) {
    a.resize(samples);
    for (double& x : a) x = rng.uniform();
  }
  return alphas;
}

LossGrad connectivity_loss_grad_at(const ParamVector& w, std::span<const ParamVector> anchors,
                                   const Objective& base, double beta,
                                   const std::vector<std::vector<double>>& alphas) {
  LossGrad out{0.0, ParamVector(w.size())};
  if (beta == 0.0) return out;
  if (anchors.empty()) throw DomainError("connectivity loss needs at least one anchor when beta > 0");
  if (alphas.size() != anchors.size()) throw ShapeError("one alpha list per anchor required");

  const double anchor_weight = beta / static_cast<double>(anchors.size());
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    check_same_size(w, anchors[j]);
    const auto& aj = alphas[j];
    if (aj.empty()) throw ShapeError("empty alpha list");
    const double sample_weight = anchor_weight / static_cast<double>(aj.size());
    for (double alpha : aj) {
      const auto point = combine(w, anchors[j], alpha);
      const auto lg = base(point);
      out.loss += sample_weight * lg.loss;
      axpy(out.grad, sample_weight * alpha, lg.grad);
    }
  }
  return out;
}

LossGrad connectivity_loss_grad(const ParamVector& w, std::span<const ParamVector> anchors,
                                const Objective& base, const ConnectivitySpec& cspec, Rng& rng) {
  cspec.validate();
  if (cspec.beta == 0.0) return {0.0, ParamVector(w.size())};
  if (anchors.empty()) throw DomainError("connectivity loss needs at least one anchor when beta > 0");
  const auto alphas = draw_alphas(cspec.alpha_mode, anchors.size(), rng);
  return connectivity_loss_grad_at(w, anchors, base, cspec.beta, alphas);
}

LossGrad connectivity_loss_grad(const ParamVector& w, std::span<const ParamVector> anchors,
                                const ModelSpec& spec, const Batch& batch,
                                const ConnectivitySpec& cspec, Rng& rng, const LossKind& loss) {
  const Objective base = [&](const ParamVector& p) { return loss_and_grad(p, spec, batch, loss); };
  return connectivity_loss_grad(w, anchors, base, cspec, rng);
}

LossGrad proximal_grad(const ParamVector& w, const ParamVector& w_ref, double mu) {
  if (!(mu >= 0.0)) throw DomainError("proximal mu must be >= 0");
  check_same_size(w, w_ref);
  LossGrad out{0.0, ParamVector(w.size())};
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - w_ref[i];
    sq += d * d;
    out.grad[i] = mu * d;
  }
  out.loss = 0.5 * mu * sq;
  return out;
}

ParamVector sgd_step(const ParamVector& w, const ParamVector& grad, double lr) {
  check_same_size(w, grad);
  if (!grad.all_finite()) throw DivergenceError("non-finite gradient in SGD step");
  ParamVector out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - lr * grad[i];
  return out;
}

ParamVector sam_step(const ParamVector& w, const Objective& grad_fn, const SamSpec& sspec,
                     double lr) {
  sspec.validate();
  const auto first = grad_fn(w);
  check_same_size(w, first.grad);
  if (!first.grad.all_finite() || !std::isfinite(first.loss)) {
    throw DivergenceError("non-finite gradient in SAM ascent step");
  }
  const double gnorm = norm2(first.grad);
  ParamVector perturbed = w;
  if (gnorm > 0.0) axpy(perturbed, sspec.rho / gnorm, first.grad);
  if (!perturbed.all_finite()) throw DivergenceError("non-finite SAM perturbation");
  const auto second = grad_fn(perturbed);
  return sgd_step(w, second.grad, lr);
}

}  // namespace gucci
