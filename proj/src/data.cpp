#include "gucci/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <locale>
#include <numeric>
#include <sstream>

#include "gucci/error.hpp"
#include "gucci/format.hpp"
#include "gucci/rng.hpp"

namespace gucci {

std::vector<std::int64_t> Dataset::class_histogram() const {
  std::vector<std::int64_t> hist(num_classes, 0);
  for (int y : examples.labels) ++hist[static_cast<std::size_t>(y)];
  return hist;
}

std::vector<std::int64_t> Dataset::class_histogram(std::span<const std::size_t> rows) const {
  std::vector<std::int64_t> hist(num_classes, 0);
  for (auto r : rows) ++hist[static_cast<std::size_t>(examples.labels[r])];
  return hist;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

namespace {

std::vector<std::vector<double>> blob_means(std::size_t clusters, std::size_t dim) {
  std::vector<std::vector<double>> means(clusters, std::vector<double>(dim, 0.0));
  if (clusters <= dim) {
    const double s = 1.0 / std::sqrt(2.0);
    for (std::size_t c = 0; c < clusters; ++c) means[c][c] = s;
    return means;
  }
  // Regular polygon with unit edge length.
  const double pi = std::acos(-1.0);
  const double radius = 0.5 / std::sin(pi / static_cast<double>(clusters));
  for (std::size_t c = 0; c < clusters; ++c) {
    const double theta = 2.0 * pi * static_cast<double>(c) / static_cast<double>(clusters);
    means[c][0] = radius * std::cos(theta);
    means[c][1] = radius * std::sin(theta);
  }
  return means;
}

Dataset assemble(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                 std::size_t dim, std::size_t classes, Split split, Rng& rng) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  Dataset d;
  d.num_classes = classes;
  d.split = split;
  d.examples.inputs = Matrix(rows.size(), dim);
  d.examples.labels.resize(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy(rows[order[i]].begin(), rows[order[i]].end(), d.examples.inputs.row(i).begin());
    d.examples.labels[i] = labels[order[i]];
  }
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> synth_blobs(const BlobsParams& params) {
  if (params.classes < 2) throw DomainError("blobs need at least 2 classes");
  if (params.dim < 2) throw DomainError("blobs need input dimension >= 2");
  if (params.n_per_class < 5) throw DomainError("blobs need n_per_class >= 5 for the 80/20 split");
  if (!(params.spread >= 0.0)) throw DomainError("blob spread must be >= 0");
  if (params.modes_per_class < 1) throw DomainError("modes_per_class must be >= 1");

  const std::size_t modes = params.modes_per_class;
  const auto means = blob_means(params.classes * modes, params.dim);
  Rng rng(derive_seed({params.seed, 0x626c6f6273ULL}));
  const std::size_t n_test = params.n_per_class / 5;
  const std::size_t n_train = params.n_per_class - n_test;

  std::vector<std::vector<double>> train_rows, test_rows;
  std::vector<int> train_labels, test_labels;
  for (std::size_t c = 0; c < params.classes; ++c) {
    for (std::size_t i = 0; i < params.n_per_class; ++i) {
      const auto& mu = means[(i % modes) * params.classes + c];
      std::vector<double> x(params.dim);
      for (std::size_t k = 0; k < params.dim; ++k) x[k] = mu[k] + params.spread * rng.normal();
      if (i < n_train) {
        train_rows.push_back(std::move(x));
        train_labels.push_back(static_cast<int>(c));
      } else {
        test_rows.push_back(std::move(x));
        test_labels.push_back(static_cast<int>(c));
      }
    }
  }
  auto train = assemble(train_rows, train_labels, params.dim, params.classes, Split::Train, rng);
  auto test = assemble(test_rows, test_labels, params.dim, params.classes, Split::Test, rng);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) {
    throw IdxParseError(IdxParseError::Kind::Truncated, bytes.size(),
                        std::string("truncated file while reading ") + what);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxParseError(IdxParseError::Kind::Io, 0, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes, Split split) {
  if (read_be32(image_bytes, 0, "image magic") != kImageMagic) {
    throw IdxParseError(IdxParseError::Kind::WrongMagic, 0, "wrong magic for images");
  }
  const std::size_t count = read_be32(image_bytes, 4, "image count");
  const std::size_t rows = read_be32(image_bytes, 8, "image rows");
  const std::size_t cols = read_be32(image_bytes, 12, "image cols");
  if (rows == 0 || cols == 0) {
    throw IdxParseError(IdxParseError::Kind::CountMismatch, 8, "zero-sized images");
  }
  const std::size_t pixels = rows * cols;
  constexpr std::size_t image_data = 16;
  if (image_bytes.size() < image_data + count * pixels) {
    throw IdxParseError(IdxParseError::Kind::Truncated, image_bytes.size(),
                        "truncated image data");
  }

  if (read_be32(label_bytes, 0, "label magic") != kLabelMagic) {
    throw IdxParseError(IdxParseError::Kind::WrongMagic, 0, "wrong magic for labels");
  }
  const std::size_t label_count = read_be32(label_bytes, 4, "label count");
  if (label_count != count) {
    throw IdxParseError(IdxParseError::Kind::CountMismatch, 4,
                        "label count " + std::to_string(label_count) + " != image count " +
                            std::to_string(count));
  }
  constexpr std::size_t label_data = 8;
  if (label_bytes.size() < label_data + count) {
    throw IdxParseError(IdxParseError::Kind::Truncated, label_bytes.size(),
                        "truncated label data");
  }
  if (count == 0) throw IdxParseError(IdxParseError::Kind::CountMismatch, 4, "no examples");

  Dataset d;
  d.split = split;
  d.examples.inputs = Matrix(count, pixels);
  d.examples.labels.resize(count);
  int max_label = 1;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      d.examples.inputs(i, p) = static_cast<double>(image_bytes[image_data + i * pixels + p]) / 255.0;
    }
    const int y = label_bytes[label_data + i];
    d.examples.labels[i] = y;
    max_label = std::max(max_label, y);
  }
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels, split);
}

// ---------------------------------------------------------------------------
// Partitioning

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& d) {
  std::vector<std::vector<std::size_t>> by_class(d.num_classes);
  for (std::size_t i = 0; i < d.size(); ++i) {
    by_class[static_cast<std::size_t>(d.examples.labels[i])].push_back(i);
  }
  return by_class;
}

void finalize(ClientPartition& p, const Dataset& d) {
  p.class_counts.clear();
  for (auto& a : p.assignments) {
    std::sort(a.begin(), a.end());
    p.class_counts.push_back(d.class_histogram(a));
  }
}

void check_client_count(const Dataset& d, std::size_t clients) {
  if (clients < 1) throw DomainError("need at least one client");
  if (clients > d.size()) {
    throw DomainError("more clients (" + std::to_string(clients) + ") than examples (" +
                      std::to_string(d.size()) + ")");
  }
}

}  // namespace

ClientPartition dirichlet_partition(const Dataset& dataset, std::size_t clients, double alpha,
                                    std::uint64_t seed) {
  check_client_count(dataset, clients);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Dirichlet alpha must be > 0");

  ClientPartition p;
  p.assignments.resize(clients);
  p.dirichlet_alpha = alpha;
  p.seed = seed;
  Rng rng(derive_seed({seed, 0x6469726963686c74ULL}));

  auto by_class = indices_by_class(dataset);
  std::vector<double> props(clients);
  for (auto& idx : by_class) {
    rng.shuffle(std::span<std::size_t>(idx));
    double sum = 0.0;
    for (double& g : props) {
      g = rng.gamma(alpha);
      sum += g;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      // Every gamma draw underflowed: put the class on one client.
      std::fill(props.begin(), props.end(), 0.0);
      props[rng.uniform_index(clients)] = 1.0;
      sum = 1.0;
    }
    const double n_c = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t j = 0; j < clients; ++j) {
      cum += props[j] / sum;
      std::size_t end = j + 1 == clients ? idx.size()
                                         : static_cast<std::size_t>(std::llround(cum * n_c));
      end = std::clamp(end, start, idx.size());
      p.assignments[j].insert(p.assignments[j].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                              idx.begin() + static_cast<std::ptrdiff_t>(end));
      start = end;
    }
  }

  for (;;) {
    auto empty = std::find_if(p.assignments.begin(), p.assignments.end(),
                              [](const auto& a) { return a.empty(); });
    if (empty == p.assignments.end()) break;
    auto largest = std::max_element(p.assignments.begin(), p.assignments.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    empty->push_back(largest->back());
    largest->pop_back();
    ++p.repair_count;
  }
  finalize(p, dataset);
  return p;
}

ClientPartition iid_partition(const Dataset& dataset, std::size_t clients, std::uint64_t seed) {
  check_client_count(dataset, clients);
  ClientPartition p;
  p.assignments.resize(clients);
  p.seed = seed;
  Rng rng(derive_seed({seed, 0x696964ULL}));
  std::size_t deal = 0;
  for (auto& idx : indices_by_class(dataset)) {
    rng.shuffle(std::span<std::size_t>(idx));
    for (auto i : idx) p.assignments[deal++ % clients].push_back(i);
  }
  finalize(p, dataset);
  return p;
}

void check_partition(const ClientPartition& partition, const Dataset& dataset) {
  std::vector<char> seen(dataset.size(), 0);
  std::size_t total = 0;
  for (std::size_t c = 0; c < partition.num_clients(); ++c) {
    const auto& a = partition.assignments[c];
    if (a.empty()) throw DomainError("client " + std::to_string(c) + " has no examples");
    for (auto i : a) {
      if (i >= dataset.size()) throw DomainError("index out of range in partition");
      if (seen[i]) throw DomainError("index " + std::to_string(i) + " assigned twice");
      seen[i] = 1;
      ++total;
    }
    if (partition.class_counts.size() != partition.num_clients() ||
        partition.class_counts[c] != dataset.class_histogram(a)) {
      throw DomainError("class_counts do not match assignments for client " + std::to_string(c));
    }
  }
  if (total != dataset.size()) throw DomainError("partition does not cover the dataset");
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("distribution sizes differ");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return 0.5 * acc;
}

namespace {
std::vector<double> normalize(std::span<const std::int64_t> counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<double> out(counts.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t k = 0; k < counts.size(); ++k) out[k] = static_cast<double>(counts[k]) / total;
  }
  return out;
}
}  // namespace

PartitionStats partition_stats(const ClientPartition& partition,
                               std::span<const std::int64_t> global_hist) {
  const auto q = normalize(global_hist);
  PartitionStats s;
  for (const auto& counts : partition.class_counts) {
    if (counts.size() != q.size()) throw ShapeError("class count width differs from global histogram");
    const auto p = normalize(counts);
    s.tv.push_back(total_variation(p, q));
  }
  if (!s.tv.empty()) {
    s.mean_tv = std::accumulate(s.tv.begin(), s.tv.end(), 0.0) / static_cast<double>(s.tv.size());
    s.max_tv = *std::max_element(s.tv.begin(), s.tv.end());
  }
  return s;
}

std::string partition_stats_csv(const ClientPartition& partition, const PartitionStats& stats) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  const std::size_t classes = partition.class_counts.empty() ? 0 : partition.class_counts[0].size();
  out << "client,size,tv";
  for (std::size_t k = 0; k < classes; ++k) out << ",count_" << k;
  out << '\n';
  for (std::size_t c = 0; c < partition.num_clients(); ++c) {
    out << c << ',' << partition.assignments[c].size() << ',' << format_double(stats.tv[c]);
    for (auto n : partition.class_counts[c]) out << ',' << n;
    out << '\n';
  }
  return out.str();
}

}  // namespace gucci
