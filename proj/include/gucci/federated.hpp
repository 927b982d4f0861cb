#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gucci/data.hpp"
#include "gucci/landscape.hpp"
#include "gucci/optim.hpp"

namespace gucci {

struct FedAvg {
  bool operator==(const FedAvg&) const = default;
};

struct FedProx {
  double mu = 0.01;
  bool operator==(const FedProx&) const = default;
};

struct FedSAM {
  double rho = 0.05;
  bool operator==(const FedSAM&) const = default;
};

/// Calibrated cross-entropy with the client's own class counts.
struct FedLC {
  double tau = 0.5;
  bool operator==(const FedLC&) const = default;
};

/// Cross-entropy plus the connectivity term toward the last N global models.
struct FedGuCci {
  double beta = 0.5;
  std::size_t N = 3;
  AlphaMode alpha_mode = MonteCarlo{1};
  bool operator==(const FedGuCci&) const = default;
};

/// FedGuCci with calibrated cross-entropy as the base loss and a SAM step on
/// the whole objective. Alphas are drawn once per step and shared by both
/// SAM gradient evaluations.
struct FedGuCciPlus {
  double beta = 0.5;
  std::size_t N = 3;
  AlphaMode alpha_mode = MonteCarlo{1};
  double tau = 0.5;
  double rho = 0.05;
  bool operator==(const FedGuCciPlus&) const = default;
};

using Strategy = std::variant<FedAvg, FedProx, FedSAM, FedLC, FedGuCci, FedGuCciPlus>;

std::string strategy_name(const Strategy& s);
void validate(const Strategy& s);
/// Anchor window length N, or 0 for strategies without anchors.
std::size_t anchor_count(const Strategy& s);

struct BlobsSource {
  BlobsParams params;
  bool operator==(const BlobsSource&) const = default;
};

struct IdxSource {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  bool operator==(const IdxSource&) const = default;
};

using DataSource = std::variant<BlobsSource, IdxSource>;

enum class Aggregation { DataSize, Uniform };

struct RunConfig {
  DataSource data = BlobsSource{};
  std::vector<std::size_t> hidden{32};
  bool bias = true;
  std::size_t clients = 10;           // M
  double participation = 1.0;         // rho, K = ceil(rho * M)
  std::size_t rounds = 30;            // T
  std::size_t local_epochs = 3;       // E
  std::size_t batch_size = 32;
  double lr = 0.05;                   // eta_l
  Strategy strategy = FedAvg{};
  std::optional<double> dirichlet_alpha = 0.5;  // nullopt: IID
  std::uint64_t seed = 0;
  bool checkpoint = false;
  std::size_t eval_every = 1;         // the final round is always evaluated
  std::size_t barrier_every = 0;      // 0: never log group barriers
  Aggregation aggregation = Aggregation::DataSize;
  double weight_scale = 1.0;

  void validate() const;
  std::size_t clients_per_round() const;
  bool operator==(const RunConfig&) const = default;
};

struct AnchorWindow {
  std::vector<ParamVector> models;  // oldest first
  std::vector<std::size_t> rounds;

  std::size_t size() const { return models.size(); }
};

/// Appends w_g as round t's global and keeps the most recent N entries.
AnchorWindow anchor_window_update(AnchorWindow window, ParamVector w_g, std::size_t t,
                                  std::size_t N);

/// ceil(rho * M) distinct client ids in ascending order, deterministic in (seed, t).
std::vector<std::size_t> sample_clients(std::size_t M, double rho, std::size_t t,
                                        std::uint64_t seed);

struct LocalTraining {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double lr = 0.05;
};

struct LocalResult {
  ParamVector params;
  double mean_loss = 0.0;  // mean base loss over all local steps
  std::size_t steps = 0;
};

/// E epochs of minibatch SGD from w_g over a fresh shuffle per epoch. The
/// last partial batch is kept. `class_counts` feeds the calibrated losses.
LocalResult local_update(const ParamVector& w_g, const ModelSpec& spec, const Batch& data,
                         std::span<const std::int64_t> class_counts, const Strategy& strategy,
                         const LocalTraining& training, std::span<const ParamVector> anchors,
                         Rng& rng);

/// Normalized fusion weights in input order.
std::vector<double> aggregation_weights(std::span<const std::size_t> data_sizes,
                                        Aggregation mode = Aggregation::DataSize);

/// sum_i mu_i w_i scaled by weight_scale. The result does not depend on the
/// order of the (model, size) pairs.
ParamVector aggregate(std::span<const ParamVector> models, std::span<const std::size_t> data_sizes,
                      Aggregation mode = Aggregation::DataSize, double weight_scale = 1.0);

struct MetricsRecord {
  std::size_t round = 0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double mean_client_loss = 0.0;
  std::optional<GroupBarrier> group;
  std::vector<std::size_t> clients;
  double wall_seconds = 0.0;  // not part of the CSV
};

inline constexpr const char* kMetricsHeader =
    "round,test_loss,test_acc,mean_client_loss,group_loss_barrier,group_acc_barrier,clients";

/// One CSV line without the trailing newline.
std::string metrics_csv_row(const MetricsRecord& r);

struct RoundState {
  std::size_t round = 0;
  std::span<const std::size_t> clients;
  std::span<const ParamVector> locals;  // same order as clients
  const ParamVector* global = nullptr;  // aggregated result of this round
  const AnchorWindow* anchors = nullptr;
};

struct RunHooks {
  std::function<void(const MetricsRecord&)> on_record;
  std::function<void(const RoundState&)> on_round;
};

struct RunResult {
  ModelSpec spec;
  ClientPartition partition;
  ParamVector initial_global;
  ParamVector final_global;
  std::vector<MetricsRecord> records;
};

std::pair<Dataset, Dataset> load_datasets(const DataSource& source);
ModelSpec model_spec(const RunConfig& cfg, const Dataset& train);
ClientPartition make_partition(const RunConfig& cfg, const Dataset& train);

/// Algorithm: per round update the anchor window with the current global,
/// sample clients, train them in parallel on per-(client, round) RNG streams,
/// aggregate in ascending id order and evaluate on the test split.
/// A DivergenceError names the round and client.
RunResult run_federated(const RunConfig& cfg, const RunHooks& hooks = {});
RunResult run_federated(const RunConfig& cfg, const Dataset& train, const Dataset& test,
                        const RunHooks& hooks = {});

}  // namespace gucci
