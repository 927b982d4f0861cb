#include "gucci/persist.hpp"

#include <bit>
#include <limits>
#include <stdexcept>

#include "gucci/error.hpp"
#include "gucci/format.hpp"

namespace gucci {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint8_t> encode_params(const ParamVector& p) {
  if (p.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("parameter vector too long for a 32-bit length prefix");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 * p.size());
  const auto n = static_cast<std::uint32_t>(p.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  for (double v : p.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

ParamVector decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw std::runtime_error("parameter file shorter than its length prefix");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  const std::size_t expected = 4 + 8 * static_cast<std::size_t>(n);
  if (bytes.size() != expected) {
    throw std::runtime_error("parameter file holds " + std::to_string(bytes.size()) +
                             " bytes, length prefix implies " + std::to_string(expected));
  }
  ParamVector p(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[4 + 8 * k + i]) << (8 * i);
    p[k] = std::bit_cast<double>(bits);
  }
  return p;
}

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_params(const fs::path& path, const ParamVector& p) {
  ensure_parent(path);
  const auto bytes = encode_params(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

ParamVector read_params(const fs::path& path) {
  try {
    return decode_params(read_bytes(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

fs::path checkpoint_relpath(std::size_t round) {
  return fs::path("checkpoints") / ("round_" + std::to_string(round) + "_global.bin");
}

std::string sweep_csv(const SweepResult& s) {
  std::string out = "alpha,loss,accuracy\n";
  for (std::size_t i = 0; i < s.alphas.size(); ++i) {
    out += format_double(s.alphas[i]) + ',' + format_double(s.losses[i]) + ',' +
           format_double(s.accuracies[i]) + '\n';
  }
  return out;
}

json to_json(const BarrierReport& r, bool include_sweep) {
  json j{{"loss_barrier", r.loss_barrier},
         {"acc_barrier", r.acc_barrier},
         {"argmax_alpha_loss", r.argmax_alpha_loss},
         {"argmax_alpha_acc", r.argmax_alpha_acc}};
  if (include_sweep) {
    j["sweep"] = {{"alpha", r.sweep.alphas}, {"loss", r.sweep.losses}, {"accuracy", r.sweep.accuracies}};
  }
  return j;
}

json to_json(const GroupBarrier& g) {
  return {{"loss_barrier", g.loss_barrier}, {"acc_barrier", g.acc_barrier}};
}

json to_json(const LandscapeGrid& g) {
  json markers = json::array();
  const char* names[] = {"w1", "w2", "w3"};
  for (std::size_t i = 0; i < g.marker_coords.size(); ++i) {
    json m{{"name", names[i]}, {"x", g.marker_coords[i][0]}, {"y", g.marker_coords[i][1]}};
    if (i < g.marker_values.size()) {
      m["loss"] = g.marker_values[i].loss;
      m["accuracy"] = g.marker_values[i].accuracy;
    }
    markers.push_back(std::move(m));
  }
  return {{"resolution", g.resolution},
          {"layout", "row-major, row index follows y"},
          {"xs", g.xs},
          {"ys", g.ys},
          {"loss", g.losses},
          {"accuracy", g.accuracies},
          {"markers", std::move(markers)}};
}

json to_json(const ClientPartition& p) {
  json j{{"assignments", p.assignments},
         {"class_counts", p.class_counts},
         {"seed", p.seed},
         {"repair_count", p.repair_count}};
  j["alpha"] = p.dirichlet_alpha ? json(*p.dirichlet_alpha) : json(nullptr);
  return j;
}

namespace {

json arm_json(const TransitivityArm& arm) {
  json pairs = json::array();
  for (const auto& pb : arm.pairwise) {
    json e = to_json(pb.report);
    e["i"] = pb.i;
    e["j"] = pb.j;
    pairs.push_back(std::move(e));
  }
  json anchor = json::array();
  for (const auto& r : arm.anchor_to_model) anchor.push_back(to_json(r));
  json evals = json::array();
  for (const auto& e : arm.model_evals) evals.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}});
  return {{"beta", arm.beta},
          {"model_eval", std::move(evals)},
          {"pairwise", std::move(pairs)},
          {"anchor_to_model", std::move(anchor)},
          {"group", to_json(arm.group)},
          {"mean_pair_loss_barrier", arm.mean_pair_loss_barrier},
          {"mean_pair_acc_barrier", arm.mean_pair_acc_barrier},
          {"mean_anchor_acc_barrier", arm.mean_anchor_acc_barrier}};
}

}  // namespace

json to_json(const TransitivityReport& r) {
  const double c = r.control.mean_pair_acc_barrier;
  const double t = r.treatment.mean_pair_acc_barrier;
  json j{{"layer_widths", r.spec.layer_widths},
         {"anchor_eval", {{"loss", r.anchor_eval.loss}, {"accuracy", r.anchor_eval.accuracy}}},
         {"control", arm_json(r.control)},
         {"treatment", arm_json(r.treatment)}};
  j["pair_acc_barrier_reduction"] = c > 0.0 ? json(1.0 - t / c) : json(nullptr);
  return j;
}

std::string dump(const json& j) { return j.dump(2) + '\n'; }

MetricsWriter::MetricsWriter(const fs::path& path) {
  ensure_parent(path);
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsWriter::write(const MetricsRecord& r) { out_ << metrics_csv_row(r) << '\n' << std::flush; }

}  // namespace gucci
