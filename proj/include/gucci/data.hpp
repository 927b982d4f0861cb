#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gucci/nn_core.hpp"

namespace gucci {

enum class Split { Train, Test };

struct Dataset {
  Batch examples;
  std::size_t num_classes = 0;
  Split split = Split::Train;

  std::size_t size() const { return examples.size(); }
  std::size_t input_dim() const { return examples.inputs.cols; }
  /// Label histogram of length num_classes.
  std::vector<std::int64_t> class_histogram() const;
  std::vector<std::int64_t> class_histogram(std::span<const std::size_t> rows) const;
};

struct BlobsParams {
  std::size_t classes = 4;
  std::size_t dim = 8;
  std::size_t n_per_class = 100;
  double spread = 0.6;
  std::uint64_t seed = 0;
  std::size_t modes_per_class = 1;  // clusters per class; labels alternate across clusters
  bool operator==(const BlobsParams&) const = default;
};

/// Gaussian clusters with unit-distance means (simplex vertices e_k / sqrt(2)
/// when there are at most `dim` clusters, otherwise a regular polygon with
/// unit edges in the first two coordinates) and per-coordinate standard
/// deviation `spread`. Cluster k carries label k % classes, so
/// modes_per_class > 1 yields an XOR-like layout. Each class is split 80/20
/// into train/test.
std::pair<Dataset, Dataset> synth_blobs(const BlobsParams& params);

/// Parses an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]; num_classes = max label + 1 (at least 2).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::Train);

/// In-memory variant of load_idx.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes, Split split = Split::Train);

struct ClientPartition {
  std::vector<std::vector<std::size_t>> assignments;
  std::vector<std::vector<std::int64_t>> class_counts;
  std::optional<double> dirichlet_alpha;  // nullopt: IID
  std::uint64_t seed = 0;
  std::size_t repair_count = 0;

  std::size_t num_clients() const { return assignments.size(); }
};

/// Per-class Dirichlet(alpha * 1_M) proportions, then empty clients steal one
/// example at a time from the currently largest client.
ClientPartition dirichlet_partition(const Dataset& dataset, std::size_t clients, double alpha,
                                    std::uint64_t seed);

/// Stratified round-robin deal of each class's shuffled examples.
ClientPartition iid_partition(const Dataset& dataset, std::size_t clients, std::uint64_t seed);

/// Throws unless assignments form a set partition of [0, n) with no empty
/// client and class_counts match.
void check_partition(const ClientPartition& partition, const Dataset& dataset);

struct PartitionStats {
  std::vector<double> tv;
  double mean_tv = 0.0;
  double max_tv = 0.0;
};

/// Total-variation distance of every client's label distribution to the
/// global histogram.
PartitionStats partition_stats(const ClientPartition& partition,
                               std::span<const std::int64_t> global_hist);

double total_variation(std::span<const double> p, std::span<const double> q);

/// CSV with header client,size,tv,count_0..count_{C-1} and one row per client.
std::string partition_stats_csv(const ClientPartition& partition, const PartitionStats& stats);

}  // namespace gucci
