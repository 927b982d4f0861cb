#include "gucci/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gucci/error.hpp"
#include "gucci/kernels.hpp"

namespace gucci {

PointEvaluator network_evaluator(const ModelSpec& spec, const Batch& data) {
  return [&spec, &data](const ParamVector& p) { return evaluate(p, spec, data); };
}

SweepResult sweep(const ParamVector& w1, const ParamVector& w2, const PointEvaluator& eval,
                  std::size_t num_points) {
  if (num_points < 2) throw DomainError("sweep needs at least 2 points");
  check_same_size(w1, w2);
  SweepResult s;
  s.alphas.resize(num_points);
  s.losses.resize(num_points);
  s.accuracies.resize(num_points);
  const double denom = static_cast<double>(num_points - 1);
  for (std::size_t i = 0; i < num_points; ++i) s.alphas[i] = static_cast<double>(i) / denom;
  kernels::parallel_for(num_points, [&](std::size_t i) {
    const auto r = eval(combine(w1, w2, s.alphas[i]));
    s.losses[i] = r.loss;
    s.accuracies[i] = r.accuracy;
  });
  return s;
}

SweepResult sweep(const ParamVector& w1, const ParamVector& w2, const ModelSpec& spec,
                  const Batch& data, std::size_t num_points) {
  return sweep(w1, w2, network_evaluator(spec, data), num_points);
}

namespace {

void check_sweep(const SweepResult& s) {
  if (s.alphas.size() < 2 || s.losses.size() != s.alphas.size() ||
      s.accuracies.size() != s.alphas.size()) {
    throw ShapeError("malformed sweep");
  }
}

// Exact at both endpoints and when the endpoint values coincide.
double chord(double at_w1, double at_w2, double alpha) {
  return alpha == 1.0 ? at_w1 : at_w2 + alpha * (at_w1 - at_w2);
}

template <typename Excess>
BarrierValue sup_over_grid(const SweepResult& s, Excess excess) {
  BarrierValue best{-std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < s.alphas.size(); ++i) {
    const double v = excess(i);
    if (v > best.barrier) best = {v, s.alphas[i]};
  }
  return best;
}

}  // namespace

BarrierValue loss_barrier(const SweepResult& s) {
  check_sweep(s);
  const double at_w2 = s.losses.front();
  const double at_w1 = s.losses.back();
  return sup_over_grid(s, [&](std::size_t i) {
    return s.losses[i] - chord(at_w1, at_w2, s.alphas[i]);
  });
}

BarrierValue accuracy_barrier(const SweepResult& s) {
  check_sweep(s);
  const double at_w2 = s.accuracies.front();
  const double at_w1 = s.accuracies.back();
  return sup_over_grid(s, [&](std::size_t i) {
    const double ref = chord(at_w1, at_w2, s.alphas[i]);
    if (!(ref > 0.0)) {
      throw DegenerateAccuracyError("interpolated endpoint accuracy is zero at alpha = " +
                                    std::to_string(s.alphas[i]));
    }
    return 1.0 - s.accuracies[i] / ref;
  });
}

BarrierReport barrier_report(SweepResult s) {
  const auto lb = loss_barrier(s);
  const auto ab = accuracy_barrier(s);
  return {lb.barrier, ab.barrier, lb.argmax_alpha, ab.argmax_alpha, std::move(s)};
}

GroupBarrier group_barrier(std::span<const ParamVector> models, const PointEvaluator& eval) {
  if (models.size() < 2) throw DomainError("group barrier needs at least 2 models");
  const auto k = static_cast<double>(models.size());
  std::vector<EvalResult> individual(models.size());
  kernels::parallel_for(models.size(), [&](std::size_t i) { individual[i] = eval(models[i]); });
  // Centered on the first model so K identical inputs give exactly zero.
  double loss_shift = 0.0;
  double acc_shift = 0.0;
  for (const auto& r : individual) {
    loss_shift += r.loss - individual.front().loss;
    acc_shift += r.accuracy - individual.front().accuracy;
  }
  const double mean_loss = individual.front().loss + loss_shift / k;
  const double mean_acc = individual.front().accuracy + acc_shift / k;
  if (!(mean_acc > 0.0)) throw DegenerateAccuracyError("mean individual accuracy is zero");
  const auto fused = eval(mean(models));
  return {fused.loss - mean_loss, 1.0 - fused.accuracy / mean_acc};
}

GroupBarrier group_barrier(std::span<const ParamVector> models, const ModelSpec& spec,
                           const Batch& data) {
  return group_barrier(models, network_evaluator(spec, data));
}

ParamVector LandscapeGrid::to_params(double x, double y) const {
  ParamVector p = origin;
  axpy(p, x, axis_u);
  axpy(p, y, axis_v);
  return p;
}

LandscapeGrid plane_grid(const ParamVector& w1, const ParamVector& w2, const ParamVector& w3,
                         const PointEvaluator& eval, std::size_t resolution, double padding) {
  if (resolution < 2) throw DomainError("grid resolution must be >= 2");
  if (!(padding >= 0.0)) throw DomainError("grid padding must be >= 0");
  check_same_size(w1, w2);
  check_same_size(w1, w3);

  const auto d2 = subtract(w2, w1);
  const auto d3 = subtract(w3, w1);
  const double n2 = norm2(d2);
  const double n3 = norm2(d3);
  if (n2 == 0.0 || n3 == 0.0) throw DomainError("plane needs three distinct models");

  LandscapeGrid g;
  g.origin = w1;
  g.axis_u = scale(d2, 1.0 / n2);
  const double x3 = dot(d3, g.axis_u);
  auto v = d3;
  axpy(v, -x3, g.axis_u);
  const double y3 = norm2(v);
  if (y3 <= 1e-10 * n3) throw DomainError("models are collinear; no plane through them");
  g.axis_v = scale(v, 1.0 / y3);
  g.marker_coords = {{0.0, 0.0}, {n2, 0.0}, {x3, y3}};

  double xmin = std::min({0.0, n2, x3}), xmax = std::max({0.0, n2, x3});
  double ymin = 0.0, ymax = y3;
  const double px = padding * (xmax - xmin), py = padding * (ymax - ymin);
  xmin -= px;
  xmax += px;
  ymin -= py;
  ymax += py;

  g.resolution = resolution;
  g.xs.resize(resolution);
  g.ys.resize(resolution);
  const double steps = static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double t = static_cast<double>(i) / steps;
    g.xs[i] = xmin + t * (xmax - xmin);
    g.ys[i] = ymin + t * (ymax - ymin);
  }
  // Pin grid ends exactly to the box.
  g.xs.back() = xmax;
  g.ys.back() = ymax;

  g.losses.resize(resolution * resolution);
  g.accuracies.resize(resolution * resolution);
  kernels::parallel_for(resolution * resolution, [&](std::size_t idx) {
    const std::size_t row = idx / resolution;
    const std::size_t col = idx % resolution;
    const auto r = eval(g.to_params(g.xs[col], g.ys[row]));
    g.losses[idx] = r.loss;
    g.accuracies[idx] = r.accuracy;
  });

  for (const auto& m : g.marker_coords) g.marker_values.push_back(eval(g.to_params(m[0], m[1])));
  return g;
}

LandscapeGrid plane_grid(const ParamVector& w1, const ParamVector& w2, const ParamVector& w3,
                         const ModelSpec& spec, const Batch& data, std::size_t resolution,
                         double padding) {
  return plane_grid(w1, w2, w3, network_evaluator(spec, data), resolution, padding);
}

// ---------------------------------------------------------------------------

double lemma1_max_halfwidth(double d_eps, double delta, std::size_t S) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (S < 1) throw DomainError("parameter count S must be >= 1");
  if (!(d_eps > 0.0)) throw DomainError("d_eps must be > 0");
  return d_eps / std::pow(1.0 - delta, 1.0 / static_cast<double>(S));
}

double barrier_upper_bound(BoundKind kind, const BoundInputs& in) {
  if (in.h < 1 || in.l < 1) throw DomainError("h and l must be >= 1");
  if (!(in.b > 0.0)) throw DomainError("b must be > 0");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (!(in.d_anc >= 0.0)) throw DomainError("d_anc must be >= 0");

  const double h = static_cast<double>(in.h);
  const double l = static_cast<double>(in.l);
  const double prefactor =
      std::sqrt(2.0 * h) * in.b / (2.0 * std::pow(1.0 - in.delta, 2.0 / (h * l + h)));

  if (kind == BoundKind::Pair) {
    if (!(in.d_eps > 0.0)) throw DomainError("d_eps must be > 0");
    return prefactor * in.d_eps * (in.d_eps + in.d_anc) * std::log(12.0 * h / in.delta);
  }
  if (in.K < 1) throw DomainError("K must be >= 1");
  if (!(in.gamma >= 0.0) || !(in.Gamma >= 0.0)) throw DomainError("gamma and Gamma must be >= 0");
  if (!(in.d_eps_shifted > 0.0)) throw DomainError("d_eps_shifted must be > 0");
  const double k = static_cast<double>(in.K);
  const double d = in.d_eps_shifted;
  return prefactor * d * (d + in.d_anc) * std::log(4.0 * h * k * k / in.delta);
}

}  // namespace gucci
