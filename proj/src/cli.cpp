#include "gucci/cli.hpp"

#include <chrono>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"

#include "gucci/config.hpp"
#include "gucci/error.hpp"
#include "gucci/federated.hpp"
#include "gucci/kernels.hpp"
#include "gucci/persist.hpp"

namespace gucci {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int train_fl(const fs::path& config_path, const fs::path& dir, std::ostream& out) {
  const auto cfg = load_run_config(config_path);
  fs::create_directories(dir);
  write_text(dir / "config.json", dump(to_json(cfg)));

  const auto started = std::chrono::steady_clock::now();
  json files = json::array({"config.json", "metrics.csv"});
  MetricsWriter metrics(dir / "metrics.csv");
  RunHooks hooks;
  hooks.on_record = [&](const MetricsRecord& r) { metrics.write(r); };
  if (cfg.checkpoint) {
    hooks.on_round = [&](const RoundState& s) {
      const auto rel = checkpoint_relpath(s.round);
      write_params(dir / rel, *s.global);
      files.push_back(rel.generic_string());
    };
  }

  json summary{{"strategy", strategy_name(cfg.strategy)}};
  const auto [train, test] = load_datasets(cfg.data);
  std::optional<RunResult> result;
  try {
    result = run_federated(cfg, train, test, hooks);
  } catch (const DivergenceError& e) {
    summary["status"] = "diverged";
    summary["error"] = e.what();
    summary["files"] = files;
    write_text(dir / "summary.json", dump(summary));
    throw;
  }

  write_text(dir / "partition.json", dump(to_json(result->partition)));
  write_params(dir / "final_global.bin", result->final_global);
  files.push_back("partition.json");
  files.push_back("final_global.bin");

  const auto& last = result->records.back();
  summary["status"] = "completed";
  summary["rounds"] = cfg.rounds;
  summary["final_round"] = last.round;
  summary["final_test_loss"] = last.test_loss;
  summary["final_test_acc"] = last.test_acc;
  summary["layer_widths"] = result->spec.layer_widths;
  summary["partition_repairs"] = result->partition.repair_count;
  summary["threads"] = kernels::max_threads();
  summary["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  summary["files"] = files;
  write_text(dir / "summary.json", dump(summary));
  out << strategy_name(cfg.strategy) << ": round " << last.round << " test_acc "
      << last.test_acc << " test_loss " << last.test_loss << '\n';
  return 0;
}

int transitivity(const fs::path& config_path, const fs::path& dir, std::ostream& out) {
  const auto cfg = load_transitivity_config(config_path);
  fs::create_directories(dir);
  write_text(dir / "config.json", dump(to_json(cfg)));

  const auto report = run_transitivity(cfg);
  json files = json::array({"config.json", "transitivity.json"});
  auto emit = [&](const fs::path& rel, const std::string& text) {
    write_text(dir / rel, text);
    files.push_back(rel.generic_string());
  };
  write_params(dir / "models" / "anchor.bin", report.anchor);
  files.push_back("models/anchor.bin");
  for (const auto* arm : {&report.control, &report.treatment}) {
    const std::string name = arm == &report.control ? "control" : "treatment";
    for (const auto& p : arm->pairwise) {
      emit(fs::path("sweeps") / (name + "_pair_" + std::to_string(p.i) + "_" + std::to_string(p.j) + ".csv"),
           sweep_csv(p.report.sweep));
    }
    for (std::size_t i = 0; i < arm->models.size(); ++i) {
      emit(fs::path("sweeps") / (name + "_anchor_" + std::to_string(i) + ".csv"),
           sweep_csv(arm->anchor_to_model[i].sweep));
      const auto rel = fs::path("models") / (name + "_" + std::to_string(i) + ".bin");
      write_params(dir / rel, arm->models[i]);
      files.push_back(rel.generic_string());
    }
  }
  auto j = to_json(report);
  write_text(dir / "transitivity.json", dump(j));
  write_text(dir / "summary.json", dump({{"status", "completed"}, {"files", files}}));
  out << "pairwise acc barrier: control " << report.control.mean_pair_acc_barrier << ", treatment "
      << report.treatment.mean_pair_acc_barrier << '\n';
  return 0;
}

// Evaluation split and model shape implied by a run config, for commands that analyse checkpoints.
struct EvalContext {
  Dataset data;
  ModelSpec spec;
};

EvalContext eval_context(const fs::path& config_path, const std::string& split) {
  const auto cfg = load_run_config(config_path);
  auto [train, test] = load_datasets(cfg.data);
  const auto spec = model_spec(cfg, train);
  return {split == "train" ? std::move(train) : std::move(test), spec};
}

ParamVector load_checked(const fs::path& path, const ModelSpec& spec) {
  auto p = read_params(path);
  if (p.size() != spec.param_count()) {
    throw ShapeError(path.string() + " holds " + std::to_string(p.size()) +
                     " parameters, config implies " + std::to_string(spec.param_count()));
  }
  return p;
}

struct BoundFlags {
  std::string kind;
  std::optional<std::size_t> h, l, K, S;
  std::optional<double> b, delta, d_eps, d_anc, gamma, Gamma, d_eps_shifted;
};

template <typename T>
T need(const std::optional<T>& v, const char* flag, const std::string& kind) {
  if (!v) throw UsageError(std::string("--") + flag + " is required for --kind " + kind);
  return *v;
}

int bounds(const BoundFlags& f, std::ostream& out) {
  json j{{"kind", f.kind}};
  if (f.kind == "lemma1") {
    const double d = need(f.d_eps, "d-eps", f.kind);
    const double delta = need(f.delta, "delta", f.kind);
    const std::size_t S = need(f.S, "S", f.kind);
    j["inputs"] = {{"d_eps", d}, {"delta", delta}, {"S", S}};
    j["bound"] = lemma1_max_halfwidth(d, delta, S);
  } else {
    BoundInputs in;
    in.h = need(f.h, "h", f.kind);
    in.l = need(f.l, "l", f.kind);
    in.b = need(f.b, "b", f.kind);
    in.delta = need(f.delta, "delta", f.kind);
    in.d_anc = need(f.d_anc, "d-anc", f.kind);
    json inputs{{"h", in.h}, {"l", in.l}, {"b", in.b}, {"delta", in.delta}, {"d_anc", in.d_anc}};
    BoundKind kind = BoundKind::Pair;
    if (f.kind == "pair") {
      in.d_eps = need(f.d_eps, "d-eps", f.kind);
      inputs["d_eps"] = in.d_eps;
    } else {
      kind = BoundKind::Group;
      in.K = need(f.K, "K", f.kind);
      in.gamma = need(f.gamma, "gamma", f.kind);
      in.Gamma = need(f.Gamma, "Gamma", f.kind);
      in.d_eps_shifted = need(f.d_eps_shifted, "d-eps-shifted", f.kind);
      inputs["K"] = in.K;
      inputs["gamma"] = in.gamma;
      inputs["Gamma"] = in.Gamma;
      inputs["d_eps_shifted"] = in.d_eps_shifted;
    }
    j["inputs"] = std::move(inputs);
    j["bound"] = barrier_upper_bound(kind, in);
  }
  out << dump(j);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning simulator and loss-landscape toolkit", "gucci"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: GUCCI_THREADS or all cores)");

  fs::path config, out_dir, a, b, c, export_path;
  std::string split = "test";
  std::size_t points = kDefaultSweepPoints, resolution = 21;
  double padding = 0.2;
  BoundFlags bf;

  auto* train = app.add_subcommand("train-fl", "Run federated training");
  train->add_option("--config", config, "Run config (JSON)")->required();
  train->add_option("--out", out_dir, "Run directory")->required();

  auto* trans = app.add_subcommand("transitivity", "Anchor connectivity experiment");
  trans->add_option("--config", config, "Transitivity config (JSON)")->required();
  trans->add_option("--out", out_dir, "Output directory")->required();

  auto* barrier = app.add_subcommand("barrier", "Barriers between two checkpoints");
  barrier->add_option("--a", a, "First checkpoint (alpha = 1 end)")->required();
  barrier->add_option("--b", b, "Second checkpoint (alpha = 0 end)")->required();
  barrier->add_option("--config", config, "Run config naming data and model")->required();
  barrier->add_option("--points", points, "Sweep points")->capture_default_str();
  barrier->add_option("--split", split, "Evaluation split")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();

  auto* land = app.add_subcommand("landscape", "Loss landscape on the plane of three checkpoints");
  land->add_option("--a", a, "Checkpoint at the origin")->required();
  land->add_option("--b", b, "Second checkpoint")->required();
  land->add_option("--c", c, "Third checkpoint")->required();
  land->add_option("--config", config, "Run config naming data and model")->required();
  land->add_option("--out", export_path, "Grid JSON path")->required();
  land->add_option("--resolution", resolution, "Grid points per axis")->capture_default_str();
  land->add_option("--padding", padding, "Margin around the markers")->capture_default_str();
  land->add_option("--split", split, "Evaluation split")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();

  auto* part = app.add_subcommand("partition-stats", "Client partition statistics as CSV");
  part->add_option("--config", config, "Run config")->required();
  part->add_option("--export", export_path, "Also write the partition as JSON");

  auto* bnd = app.add_subcommand("bounds", "Closed-form barrier bounds");
  bnd->set_help_flag("--help", "Print this help message and exit");  // --h is the hidden width
  bnd->add_option("--kind", bf.kind, "pair, group or lemma1")
      ->required()
      ->check(CLI::IsMember({"pair", "group", "lemma1"}));
  bnd->add_option("--h", bf.h, "Hidden width");
  bnd->add_option("--l", bf.l, "Input dimension");
  bnd->add_option("--b", bf.b, "Input norm bound");
  bnd->add_option("--delta", bf.delta, "Failure probability");
  bnd->add_option("--d-eps", bf.d_eps, "Sublevel-set diameter");
  bnd->add_option("--d-anc", bf.d_anc, "Anchor distance");
  bnd->add_option("--K", bf.K, "Number of models");
  bnd->add_option("--gamma", bf.gamma, "Loss smoothness constant");
  bnd->add_option("--Gamma", bf.Gamma, "Heterogeneity");
  bnd->add_option("--d-eps-shifted", bf.d_eps_shifted, "Diameter at the shifted level");
  bnd->add_option("--S", bf.S, "Parameter count (lemma1)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  if (threads > 0) {
    kernels::set_num_threads(threads);
  } else {
    kernels::configure_threads_from_env();
  }

  try {
    if (*train) return train_fl(config, out_dir, out);
    if (*trans) return transitivity(config, out_dir, out);
    if (*barrier) {
      const auto ctx = eval_context(config, split);
      const auto wa = load_checked(a, ctx.spec);
      const auto wb = load_checked(b, ctx.spec);
      out << dump(to_json(barrier_report(sweep(wa, wb, ctx.spec, ctx.data.examples, points))));
      return 0;
    }
    if (*land) {
      const auto ctx = eval_context(config, split);
      const auto grid = plane_grid(load_checked(a, ctx.spec), load_checked(b, ctx.spec),
                                   load_checked(c, ctx.spec), ctx.spec, ctx.data.examples,
                                   resolution, padding);
      write_text(export_path, dump(to_json(grid)));
      return 0;
    }
    if (*part) {
      const auto cfg = load_run_config(config);
      const auto [tr, te] = load_datasets(cfg.data);
      const auto partition = make_partition(cfg, tr);
      const auto hist = tr.class_histogram();
      out << partition_stats_csv(partition, partition_stats(partition, hist));
      if (!export_path.empty()) write_text(export_path, dump(to_json(partition)));
      return 0;
    }
    if (*bnd) return bounds(bf, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << bnd->help();
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace gucci
