#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gucci/data.hpp"
#include "gucci/federated.hpp"
#include "gucci/landscape.hpp"
#include "gucci/transitivity.hpp"

namespace gucci {

/// u32 little-endian count followed by little-endian IEEE-754 doubles.
std::vector<std::uint8_t> encode_params(const ParamVector& p);
ParamVector decode_params(std::span<const std::uint8_t> bytes);

void write_params(const std::filesystem::path& path, const ParamVector& p);
ParamVector read_params(const std::filesystem::path& path);

/// Writes bytes verbatim (no newline translation), creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// checkpoints/round_<t>_global.bin relative to a run directory.
std::filesystem::path checkpoint_relpath(std::size_t round);

/// Header alpha,loss,accuracy and one row per grid point.
std::string sweep_csv(const SweepResult& s);

nlohmann::json to_json(const BarrierReport& r, bool include_sweep = false);
nlohmann::json to_json(const GroupBarrier& g);
nlohmann::json to_json(const LandscapeGrid& g);
nlohmann::json to_json(const ClientPartition& p);
/// Summary numbers of both arms; sweeps are written separately as CSV.
nlohmann::json to_json(const TransitivityReport& r);

/// Two-space indented JSON with a trailing newline.
std::string dump(const nlohmann::json& j);

/// Incrementally written metrics.csv; every row is flushed so a failed run
/// keeps the rounds it completed.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRecord& r);

 private:
  std::ofstream out_;
};

}  // namespace gucci
