#include "gucci/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include "gucci/error.hpp"

namespace gucci {

using nlohmann::json;

namespace {

std::string child(const std::string& path, const std::string& key) { return path + "." + key; }

std::string child(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
  throw ConfigError(path, "expected a non-negative integer");
}

std::size_t as_size(const json& j, const std::string& path) {
  return static_cast<std::size_t>(as_uint(j, path));
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

template <typename T, typename F>
std::vector<T> as_list(const json& j, const std::string& path, F elem) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(elem(j[i], child(path, i)));
  return out;
}

// Object view that rejects keys outside an allowed set.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& [key, _] : j_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* a) { return key == a; });
      if (!known) throw ConfigError(child(path_, key), "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!has(key)) throw ConfigError(child(path_, key), "missing required key");
    return j_.at(key);
  }
  std::string path(const char* key) const { return child(path_, key); }

  template <typename T, typename F>
  void read(const char* key, T& dst, F conv) const {
    if (has(key)) dst = conv(j_.at(key), path(key));
  }
  void read(const char* key, std::size_t& dst) const { read(key, dst, as_size); }
  void read(const char* key, double& dst) const { read(key, dst, as_double); }
  void read(const char* key, bool& dst) const { read(key, dst, as_bool); }

 private:
  const json& j_;
  std::string path_;
};

// Reads `kind` from an object, or accepts a bare string as shorthand for {"kind": s}.
std::string kind_of(const json& j, const std::string& path, const char* key) {
  if (j.is_string()) return j.get<std::string>();
  if (!j.is_object()) throw ConfigError(path, "expected an object or a string");
  if (!j.contains(key)) throw ConfigError(child(path, key), "missing required key");
  return as_string(j.at(key), child(path, key));
}

const json& object_or_empty(const json& j) {
  static const json empty = json::object();
  return j.is_string() ? empty : j;
}

AlphaMode parse_alpha_mode(const json& j, const std::string& path) {
  const auto kind = kind_of(j, path, "kind");
  const json& o = object_or_empty(j);
  if (kind == "monte_carlo") {
    Obj obj(o, path, {"kind", "samples_per_anchor"});
    MonteCarlo mc;
    if (obj.has("samples_per_anchor")) {
      mc.samples_per_anchor = static_cast<int>(as_uint(obj.at("samples_per_anchor"), obj.path("samples_per_anchor")));
    }
    return mc;
  }
  if (kind == "fixed_grid") {
    Obj obj(o, path, {"kind", "points"});
    FixedGrid g;
    if (obj.has("points")) g.points = static_cast<int>(as_uint(obj.at("points"), obj.path("points")));
    return g;
  }
  throw ConfigError(child(path, "kind"), "unknown alpha mode '" + kind + "' (monte_carlo, fixed_grid)");
}

json alpha_mode_json(const AlphaMode& m) {
  if (const auto* mc = std::get_if<MonteCarlo>(&m)) {
    return {{"kind", "monte_carlo"}, {"samples_per_anchor", mc->samples_per_anchor}};
  }
  return {{"kind", "fixed_grid"}, {"points", std::get<FixedGrid>(m).points}};
}

BlobsParams parse_blobs(const Obj& obj, BlobsParams b = {}) {
  obj.read("classes", b.classes);
  obj.read("dim", b.dim);
  obj.read("n_per_class", b.n_per_class);
  obj.read("spread", b.spread);
  obj.read("seed", b.seed, as_uint);
  obj.read("modes_per_class", b.modes_per_class);
  return b;
}

json blobs_json(const BlobsParams& b) {
  return {{"kind", "blobs"},         {"classes", b.classes}, {"dim", b.dim},
          {"n_per_class", b.n_per_class}, {"spread", b.spread}, {"seed", b.seed},
          {"modes_per_class", b.modes_per_class}};
}

constexpr std::initializer_list<const char*> kBlobKeys = {
    "kind", "classes", "dim", "n_per_class", "spread", "seed", "modes_per_class"};

DataSource parse_data(const json& j, const std::string& path) {
  const auto kind = kind_of(j, path, "kind");
  const json& o = object_or_empty(j);
  if (kind == "blobs") return BlobsSource{parse_blobs(Obj(o, path, kBlobKeys))};
  if (kind == "idx") {
    Obj obj(o, path, {"kind", "train_images", "train_labels", "test_images", "test_labels"});
    IdxSource s;
    s.train_images = as_string(obj.at("train_images"), obj.path("train_images"));
    s.train_labels = as_string(obj.at("train_labels"), obj.path("train_labels"));
    s.test_images = as_string(obj.at("test_images"), obj.path("test_images"));
    s.test_labels = as_string(obj.at("test_labels"), obj.path("test_labels"));
    return s;
  }
  throw ConfigError(child(path, "kind"), "unknown data kind '" + kind + "' (blobs, idx)");
}

json data_json(const DataSource& d) {
  if (const auto* b = std::get_if<BlobsSource>(&d)) return blobs_json(b->params);
  const auto& s = std::get<IdxSource>(d);
  return {{"kind", "idx"},
          {"train_images", s.train_images.string()},
          {"train_labels", s.train_labels.string()},
          {"test_images", s.test_images.string()},
          {"test_labels", s.test_labels.string()}};
}

Strategy parse_strategy(const json& j, const std::string& path) {
  const auto name = kind_of(j, path, "name");
  const json& o = object_or_empty(j);
  if (name == "fedavg") {
    Obj(o, path, {"name"});
    return FedAvg{};
  }
  if (name == "fedprox") {
    FedProx s;
    Obj(o, path, {"name", "mu"}).read("mu", s.mu);
    return s;
  }
  if (name == "fedsam") {
    FedSAM s;
    Obj(o, path, {"name", "rho"}).read("rho", s.rho);
    return s;
  }
  if (name == "fedlc") {
    FedLC s;
    Obj(o, path, {"name", "tau"}).read("tau", s.tau);
    return s;
  }
  if (name == "fedgucci") {
    FedGuCci s;
    Obj obj(o, path, {"name", "beta", "N", "alpha_mode"});
    obj.read("beta", s.beta);
    obj.read("N", s.N);
    obj.read("alpha_mode", s.alpha_mode, parse_alpha_mode);
    return s;
  }
  if (name == "fedgucci_plus") {
    FedGuCciPlus s;
    Obj obj(o, path, {"name", "beta", "N", "alpha_mode", "tau", "rho"});
    obj.read("beta", s.beta);
    obj.read("N", s.N);
    obj.read("alpha_mode", s.alpha_mode, parse_alpha_mode);
    obj.read("tau", s.tau);
    obj.read("rho", s.rho);
    return s;
  }
  throw ConfigError(child(path, "name"),
                    "unknown strategy '" + name +
                        "' (fedavg, fedprox, fedsam, fedlc, fedgucci, fedgucci_plus)");
}

json strategy_json(const Strategy& s) {
  json j{{"name", strategy_name(s)}};
  if (const auto* p = std::get_if<FedProx>(&s)) j["mu"] = p->mu;
  if (const auto* p = std::get_if<FedSAM>(&s)) j["rho"] = p->rho;
  if (const auto* p = std::get_if<FedLC>(&s)) j["tau"] = p->tau;
  if (const auto* p = std::get_if<FedGuCci>(&s)) {
    j["beta"] = p->beta;
    j["N"] = p->N;
    j["alpha_mode"] = alpha_mode_json(p->alpha_mode);
  }
  if (const auto* p = std::get_if<FedGuCciPlus>(&s)) {
    j["beta"] = p->beta;
    j["N"] = p->N;
    j["alpha_mode"] = alpha_mode_json(p->alpha_mode);
    j["tau"] = p->tau;
    j["rho"] = p->rho;
  }
  return j;
}

void parse_model(const json& j, const std::string& path, std::vector<std::size_t>& hidden,
                 bool& bias) {
  Obj obj(j, path, {"hidden", "bias"});
  obj.read("hidden", hidden,
           [](const json& v, const std::string& p) { return as_list<std::size_t>(v, p, as_size); });
  obj.read("bias", bias);
}

template <typename Cfg>
Cfg validated(Cfg cfg) {
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError("$", e.what());
  }
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("$", "cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  Obj obj(j, "$",
          {"data", "model", "clients", "participation", "rounds", "local_epochs", "batch_size", "lr",
           "strategy", "partition", "seed", "checkpoint", "eval_every", "barrier_every",
           "aggregation", "weight_scale"});
  RunConfig cfg;
  cfg.data = parse_data(obj.at("data"), obj.path("data"));
  cfg.strategy = parse_strategy(obj.at("strategy"), obj.path("strategy"));
  if (obj.has("model")) parse_model(obj.at("model"), obj.path("model"), cfg.hidden, cfg.bias);
  obj.read("clients", cfg.clients);
  obj.read("participation", cfg.participation);
  obj.read("rounds", cfg.rounds);
  obj.read("local_epochs", cfg.local_epochs);
  obj.read("batch_size", cfg.batch_size);
  obj.read("lr", cfg.lr);
  obj.read("seed", cfg.seed, as_uint);
  obj.read("checkpoint", cfg.checkpoint);
  obj.read("eval_every", cfg.eval_every);
  obj.read("barrier_every", cfg.barrier_every);
  obj.read("weight_scale", cfg.weight_scale);

  if (obj.has("partition")) {
    const auto path = obj.path("partition");
    const auto kind = kind_of(obj.at("partition"), path, "kind");
    const json& o = object_or_empty(obj.at("partition"));
    if (kind == "iid") {
      Obj(o, path, {"kind"});
      cfg.dirichlet_alpha.reset();
    } else if (kind == "dirichlet") {
      Obj p(o, path, {"kind", "alpha"});
      double a = *cfg.dirichlet_alpha;
      p.read("alpha", a);
      cfg.dirichlet_alpha = a;
    } else {
      throw ConfigError(child(path, "kind"), "unknown partition '" + kind + "' (iid, dirichlet)");
    }
  }
  if (obj.has("aggregation")) {
    const auto a = as_string(obj.at("aggregation"), obj.path("aggregation"));
    if (a == "data_size") {
      cfg.aggregation = Aggregation::DataSize;
    } else if (a == "uniform") {
      cfg.aggregation = Aggregation::Uniform;
    } else {
      throw ConfigError(obj.path("aggregation"), "expected 'data_size' or 'uniform'");
    }
  }
  return validated(std::move(cfg));
}

json to_json(const RunConfig& cfg) {
  json partition = cfg.dirichlet_alpha
                       ? json{{"kind", "dirichlet"}, {"alpha", *cfg.dirichlet_alpha}}
                       : json{{"kind", "iid"}};
  return {{"data", data_json(cfg.data)},
          {"model", {{"hidden", cfg.hidden}, {"bias", cfg.bias}}},
          {"clients", cfg.clients},
          {"participation", cfg.participation},
          {"rounds", cfg.rounds},
          {"local_epochs", cfg.local_epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"strategy", strategy_json(cfg.strategy)},
          {"partition", std::move(partition)},
          {"seed", cfg.seed},
          {"checkpoint", cfg.checkpoint},
          {"eval_every", cfg.eval_every},
          {"barrier_every", cfg.barrier_every},
          {"aggregation", cfg.aggregation == Aggregation::Uniform ? "uniform" : "data_size"},
          {"weight_scale", cfg.weight_scale}};
}

TransitivityConfig parse_transitivity_config(const json& j) {
  Obj obj(j, "$",
          {"data", "model", "models", "init_seeds", "anchor_seed", "seed", "beta", "alpha_mode",
           "anchor_steps", "steps", "lr", "sweep_points"});
  TransitivityConfig cfg;
  if (obj.has("data")) {
    const auto path = obj.path("data");
    const auto kind = kind_of(obj.at("data"), path, "kind");
    if (kind != "blobs") throw ConfigError(child(path, "kind"), "transitivity runs on blobs only");
    cfg.data = parse_blobs(Obj(object_or_empty(obj.at("data")), path, kBlobKeys), cfg.data);
  }
  if (obj.has("model")) parse_model(obj.at("model"), obj.path("model"), cfg.hidden, cfg.bias);
  obj.read("models", cfg.models);
  obj.read("init_seeds", cfg.init_seeds, [](const json& v, const std::string& p) {
    return as_list<std::uint64_t>(v, p, as_uint);
  });
  obj.read("anchor_seed", cfg.anchor_seed, as_uint);
  obj.read("seed", cfg.seed, as_uint);
  obj.read("beta", cfg.beta);
  obj.read("alpha_mode", cfg.alpha_mode, parse_alpha_mode);
  obj.read("anchor_steps", cfg.anchor_steps);
  obj.read("steps", cfg.steps);
  obj.read("lr", cfg.lr);
  obj.read("sweep_points", cfg.sweep_points);
  return validated(std::move(cfg));
}

json to_json(const TransitivityConfig& cfg) {
  return {{"data", blobs_json(cfg.data)},
          {"model", {{"hidden", cfg.hidden}, {"bias", cfg.bias}}},
          {"models", cfg.models},
          {"init_seeds", cfg.init_seeds},
          {"anchor_seed", cfg.anchor_seed},
          {"seed", cfg.seed},
          {"beta", cfg.beta},
          {"alpha_mode", alpha_mode_json(cfg.alpha_mode)},
          {"anchor_steps", cfg.anchor_steps},
          {"steps", cfg.steps},
          {"lr", cfg.lr},
          {"sweep_points", cfg.sweep_points}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path));
}

TransitivityConfig load_transitivity_config(const std::filesystem::path& path) {
  return parse_transitivity_config(read_json_file(path));
}

}  // namespace gucci
