#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gucci/data.hpp"
#include "gucci/landscape.hpp"
#include "gucci/optim.hpp"

namespace gucci {

/// Anchor-based connectivity experiment: one anchor trained with plain
/// cross-entropy, then K models trained independently from distinct
/// initializations, once without (control) and once with the connectivity
/// term toward the anchor (treatment). Both arms share initializations.
struct TransitivityConfig {
  BlobsParams data{2, 2, 200, 0.05, 0, 2};  // two modes per class: XOR layout
  std::vector<std::size_t> hidden{16};
  bool bias = true;
  std::size_t models = 2;              // K
  std::vector<std::uint64_t> init_seeds;  // K entries, or empty to derive from seed
  std::uint64_t anchor_seed = 1000;
  std::uint64_t seed = 0;
  double beta = 0.5;
  AlphaMode alpha_mode = MonteCarlo{1};
  std::size_t anchor_steps = 200;
  std::size_t steps = 200;
  double lr = 1.0;
  std::size_t sweep_points = kDefaultSweepPoints;

  void validate() const;
  /// Initialization seed of model i.
  std::uint64_t init_seed(std::size_t i) const;
  bool operator==(const TransitivityConfig&) const = default;
};

struct PairBarrier {
  std::size_t i = 0;
  std::size_t j = 0;
  BarrierReport report;  // sweep(models[i], models[j])
};

struct TransitivityArm {
  double beta = 0.0;
  std::vector<ParamVector> models;
  std::vector<ParamVector> initial_models;
  std::vector<EvalResult> model_evals;
  std::vector<PairBarrier> pairwise;
  std::vector<BarrierReport> anchor_to_model;  // sweep(anchor, models[i])
  GroupBarrier group;
  double mean_pair_loss_barrier = 0.0;
  double mean_pair_acc_barrier = 0.0;
  double mean_anchor_acc_barrier = 0.0;
};

struct TransitivityReport {
  ModelSpec spec;
  ParamVector anchor;
  EvalResult anchor_eval;
  TransitivityArm control;    // beta = 0
  TransitivityArm treatment;  // beta = cfg.beta
};

/// Full-batch gradient descent on cross-entropy plus, when beta > 0, the
/// connectivity term toward `anchors`.
ParamVector train_full_batch(const ModelSpec& spec, const Batch& data, ParamVector init,
                             std::size_t steps, double lr, std::span<const ParamVector> anchors,
                             const ConnectivitySpec& cspec, Rng& rng);

TransitivityReport run_transitivity(const TransitivityConfig& cfg);

/// Same experiment on caller-provided data.
TransitivityReport run_transitivity(const TransitivityConfig& cfg, const Dataset& train,
                                    const Dataset& test);

}  // namespace gucci
