#include "gucci/transitivity.hpp"

#include "gucci/error.hpp"

namespace gucci {

void TransitivityConfig::validate() const {
  if (models < 2) throw DomainError("transitivity needs at least 2 trained models");
  if (!init_seeds.empty() && init_seeds.size() != models) {
    throw DomainError("init_seeds must list one seed per model");
  }
  if (!(beta >= 0.0)) throw DomainError("beta must be >= 0");
  if (!(lr > 0.0)) throw DomainError("lr must be > 0");
  if (sweep_points < 2) throw DomainError("sweep_points must be >= 2");
  ConnectivitySpec{beta, alpha_mode}.validate();
}

std::uint64_t TransitivityConfig::init_seed(std::size_t i) const {
  return init_seeds.empty() ? derive_seed({seed, 0x6d6f64656cULL, i}) : init_seeds[i];
}

ParamVector train_full_batch(const ModelSpec& spec, const Batch& data, ParamVector init,
                             std::size_t steps, double lr, std::span<const ParamVector> anchors,
                             const ConnectivitySpec& cspec, Rng& rng) {
  ParamVector w = std::move(init);
  for (std::size_t s = 0; s < steps; ++s) {
    auto lg = loss_and_grad(w, spec, data);
    if (cspec.beta > 0.0) {
      const auto conn = connectivity_loss_grad(w, anchors, spec, data, cspec, rng);
      axpy(lg.grad, 1.0, conn.grad);
    }
    w = sgd_step(w, lg.grad, lr);
  }
  return w;
}

namespace {

TransitivityArm train_arm(const TransitivityConfig& cfg, const ModelSpec& spec,
                          const Dataset& train, const Dataset& test, const ParamVector& anchor,
                          double beta) {
  TransitivityArm arm;
  arm.beta = beta;
  const ConnectivitySpec cspec{beta, cfg.alpha_mode};
  const std::span<const ParamVector> anchors(&anchor, 1);
  for (std::size_t i = 0; i < cfg.models; ++i) {
    auto init = init_params(spec, cfg.init_seed(i));
    arm.initial_models.push_back(init);
    Rng rng(derive_seed({cfg.seed, 0x636f6e6eULL, i}));
    arm.models.push_back(
        train_full_batch(spec, train.examples, std::move(init), cfg.steps, cfg.lr, anchors, cspec, rng));
  }

  const auto eval = network_evaluator(spec, test.examples);
  for (const auto& m : arm.models) arm.model_evals.push_back(eval(m));
  for (std::size_t i = 0; i < arm.models.size(); ++i) {
    for (std::size_t j = i + 1; j < arm.models.size(); ++j) {
      auto report = barrier_report(sweep(arm.models[i], arm.models[j], eval, cfg.sweep_points));
      arm.mean_pair_loss_barrier += report.loss_barrier;
      arm.mean_pair_acc_barrier += report.acc_barrier;
      arm.pairwise.push_back({i, j, std::move(report)});
    }
    auto to_anchor = barrier_report(sweep(anchor, arm.models[i], eval, cfg.sweep_points));
    arm.mean_anchor_acc_barrier += to_anchor.acc_barrier;
    arm.anchor_to_model.push_back(std::move(to_anchor));
  }
  const auto pairs = static_cast<double>(arm.pairwise.size());
  arm.mean_pair_loss_barrier /= pairs;
  arm.mean_pair_acc_barrier /= pairs;
  arm.mean_anchor_acc_barrier /= static_cast<double>(arm.models.size());
  arm.group = group_barrier(arm.models, eval);
  return arm;
}

}  // namespace

TransitivityReport run_transitivity(const TransitivityConfig& cfg, const Dataset& train,
                                    const Dataset& test) {
  cfg.validate();
  TransitivityReport report;
  report.spec.layer_widths.push_back(train.input_dim());
  for (auto h : cfg.hidden) report.spec.layer_widths.push_back(h);
  report.spec.layer_widths.push_back(train.num_classes);
  report.spec.bias = cfg.bias;
  report.spec.validate();

  Rng anchor_rng(derive_seed({cfg.anchor_seed, 0x616e63ULL}));
  report.anchor = train_full_batch(report.spec, train.examples,
                                   init_params(report.spec, cfg.anchor_seed), cfg.anchor_steps,
                                   cfg.lr, {}, ConnectivitySpec{0.0, cfg.alpha_mode}, anchor_rng);
  report.anchor_eval = evaluate(report.anchor, report.spec, test.examples);
  report.control = train_arm(cfg, report.spec, train, test, report.anchor, 0.0);
  report.treatment = train_arm(cfg, report.spec, train, test, report.anchor, cfg.beta);
  return report;
}

TransitivityReport run_transitivity(const TransitivityConfig& cfg) {
  const auto [train, test] = synth_blobs(cfg.data);
  return run_transitivity(cfg, train, test);
}

}  // namespace gucci
