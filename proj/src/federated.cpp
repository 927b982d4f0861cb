#include "gucci/federated.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "gucci/error.hpp"
#include "gucci/format.hpp"
#include "gucci/kernels.hpp"

namespace gucci {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

constexpr std::uint64_t kTagGlobalInit = 0x676c6f62;  // "glob"
constexpr std::uint64_t kTagPartition = 0x70617274;   // "part"
constexpr std::uint64_t kTagSample = 0x73616d70;      // "samp"
constexpr std::uint64_t kTagClient = 0x636c6e74;      // "clnt"

void check_rho(double rho, const char* what) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError(std::string(what) + " rho must be > 0");
}

// ceil(rho * M); the epsilon keeps products such as 0.7 * 10 from rounding up past 7.
std::size_t participants(std::size_t M, double rho) {
  const double k = std::ceil(rho * static_cast<double>(M) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, M);
}

void check_anchor_params(double beta, std::size_t N, const AlphaMode& mode) {
  ConnectivitySpec{beta, mode}.validate();
  if (N < 1) throw DomainError("anchor window N must be >= 1");
}

}  // namespace

std::string strategy_name(const Strategy& s) {
  return std::visit(Overloaded{[](const FedAvg&) { return "fedavg"; },
                               [](const FedProx&) { return "fedprox"; },
                               [](const FedSAM&) { return "fedsam"; },
                               [](const FedLC&) { return "fedlc"; },
                               [](const FedGuCci&) { return "fedgucci"; },
                               [](const FedGuCciPlus&) { return "fedgucci_plus"; }},
                    s);
}

void validate(const Strategy& s) {
  std::visit(Overloaded{[](const FedAvg&) {},
                        [](const FedProx& p) {
                          if (!(p.mu >= 0.0) || !std::isfinite(p.mu)) {
                            throw DomainError("FedProx mu must be >= 0");
                          }
                        },
                        [](const FedSAM& p) { check_rho(p.rho, "FedSAM"); },
                        [](const FedLC& p) {
                          if (!(p.tau >= 0.0)) throw DomainError("FedLC tau must be >= 0");
                        },
                        [](const FedGuCci& p) { check_anchor_params(p.beta, p.N, p.alpha_mode); },
                        [](const FedGuCciPlus& p) {
                          check_anchor_params(p.beta, p.N, p.alpha_mode);
                          if (!(p.tau >= 0.0)) throw DomainError("FedGuCci+ tau must be >= 0");
                          check_rho(p.rho, "FedGuCci+");
                        }},
             s);
}

std::size_t anchor_count(const Strategy& s) {
  if (const auto* g = std::get_if<FedGuCci>(&s)) return g->N;
  if (const auto* g = std::get_if<FedGuCciPlus>(&s)) return g->N;
  return 0;
}

std::size_t RunConfig::clients_per_round() const { return participants(clients, participation); }

void RunConfig::validate() const {
  if (clients < 1) throw DomainError("clients must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) {
    throw DomainError("participation must lie in (0, 1]");
  }
  if (rounds < 1) throw DomainError("rounds must be >= 1");
  if (local_epochs < 1) throw DomainError("local_epochs must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("lr must be >= 0");
  if (dirichlet_alpha && !(*dirichlet_alpha > 0.0)) throw DomainError("dirichlet_alpha must be > 0");
  if (eval_every < 1) throw DomainError("eval_every must be >= 1");
  if (!(weight_scale > 0.0) || !std::isfinite(weight_scale)) {
    throw DomainError("weight_scale must be > 0");
  }
  for (auto h : hidden) {
    if (h == 0) throw DomainError("hidden widths must be >= 1");
  }
  gucci::validate(strategy);
}

AnchorWindow anchor_window_update(AnchorWindow window, ParamVector w_g, std::size_t t,
                                  std::size_t N) {
  if (t < 1) throw DomainError("round index must be >= 1");
  if (N < 1) throw DomainError("anchor window N must be >= 1");
  window.models.push_back(std::move(w_g));
  window.rounds.push_back(t);
  while (window.models.size() > N) {
    window.models.erase(window.models.begin());
    window.rounds.erase(window.rounds.begin());
  }
  return window;
}

std::vector<std::size_t> sample_clients(std::size_t M, double rho, std::size_t t,
                                        std::uint64_t seed) {
  if (M < 1) throw DomainError("clients must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("participation must lie in (0, 1]");
  const std::size_t K = participants(M, rho);

  std::vector<std::size_t> ids(M);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (K < M) {
    Rng rng(derive_seed({seed, kTagSample, t}));
    // Partial Fisher-Yates: the first K slots end up a uniform K-subset.
    for (std::size_t i = 0; i < K; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.uniform_index(M - i));
      std::swap(ids[i], ids[j]);
    }
    ids.resize(K);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

LocalResult local_update(const ParamVector& w_g, const ModelSpec& spec, const Batch& data,
                         std::span<const std::int64_t> class_counts, const Strategy& strategy,
                         const LocalTraining& training, std::span<const ParamVector> anchors,
                         Rng& rng) {
  if (data.size() == 0) throw DomainError("client has no data");
  if (training.epochs < 1) throw DomainError("local epochs must be >= 1");
  if (training.batch_size < 1) throw DomainError("batch_size must be >= 1");
  validate(strategy);
  const std::vector<std::int64_t> counts(class_counts.begin(), class_counts.end());

  LocalResult result{w_g, 0.0, 0};
  ParamVector& w = result.params;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t e = 0; e < training.epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += training.batch_size) {
      const std::size_t stop = std::min(order.size(), start + training.batch_size);
      const Batch batch =
          data.gather(std::span<const std::size_t>(order).subspan(start, stop - start));

      const auto ce = [&](const ParamVector& p) { return loss_and_grad(p, spec, batch); };
      double base_loss = 0.0;
      std::visit(
          Overloaded{
              [&](const FedAvg&) {
                auto lg = ce(w);
                base_loss = lg.loss;
                w = sgd_step(w, lg.grad, training.lr);
              },
              [&](const FedProx& p) {
                auto lg = ce(w);
                base_loss = lg.loss;
                axpy(lg.grad, 1.0, proximal_grad(w, w_g, p.mu).grad);
                w = sgd_step(w, lg.grad, training.lr);
              },
              [&](const FedSAM& p) {
                bool first = true;
                const Objective obj = [&](const ParamVector& q) {
                  auto lg = ce(q);
                  if (first) base_loss = lg.loss;
                  first = false;
                  return lg;
                };
                w = sam_step(w, obj, SamSpec{p.rho}, training.lr);
              },
              [&](const FedLC& p) {
                auto lg = loss_and_grad(w, spec, batch, CalibratedCE{p.tau, counts});
                base_loss = lg.loss;
                w = sgd_step(w, lg.grad, training.lr);
              },
              [&](const FedGuCci& p) {
                auto lg = ce(w);
                base_loss = lg.loss;
                if (p.beta > 0.0) {
                  const auto conn = connectivity_loss_grad(
                      w, anchors, spec, batch, ConnectivitySpec{p.beta, p.alpha_mode}, rng);
                  axpy(lg.grad, 1.0, conn.grad);
                }
                w = sgd_step(w, lg.grad, training.lr);
              },
              [&](const FedGuCciPlus& p) {
                const LossKind kind = CalibratedCE{p.tau, counts};
                const Objective base = [&](const ParamVector& q) {
                  return loss_and_grad(q, spec, batch, kind);
                };
                std::vector<std::vector<double>> alphas;
                if (p.beta > 0.0) {
                  if (anchors.empty()) {
                    throw DomainError("connectivity loss needs at least one anchor when beta > 0");
                  }
                  alphas = draw_alphas(p.alpha_mode, anchors.size(), rng);
                }
                bool first = true;
                const Objective total = [&](const ParamVector& q) {
                  auto lg = base(q);
                  if (first) base_loss = lg.loss;
                  first = false;
                  if (p.beta > 0.0) {
                    const auto conn = connectivity_loss_grad_at(q, anchors, base, p.beta, alphas);
                    lg.loss += conn.loss;
                    axpy(lg.grad, 1.0, conn.grad);
                  }
                  return lg;
                };
                w = sam_step(w, total, SamSpec{p.rho}, training.lr);
              }},
          strategy);

      if (!w.all_finite()) throw DivergenceError("non-finite parameters after local step");
      result.mean_loss += base_loss;
      ++result.steps;
    }
  }
  result.mean_loss /= static_cast<double>(result.steps);
  return result;
}

std::vector<double> aggregation_weights(std::span<const std::size_t> data_sizes,
                                        Aggregation mode) {
  if (data_sizes.empty()) throw DomainError("aggregation over zero models");
  std::vector<double> mu(data_sizes.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data_sizes.size(); ++i) {
    if (data_sizes[i] == 0) throw DomainError("aggregation weights need positive data sizes");
    mu[i] = mode == Aggregation::Uniform ? 1.0 : static_cast<double>(data_sizes[i]);
    total += mu[i];
  }
  for (double& m : mu) m /= total;
  const double sum = std::accumulate(mu.begin(), mu.end(), 0.0);
  for (double& m : mu) m /= sum;
  return mu;
}

ParamVector aggregate(std::span<const ParamVector> models, std::span<const std::size_t> data_sizes,
                      Aggregation mode, double weight_scale) {
  if (models.size() != data_sizes.size()) {
    throw ShapeError("aggregate needs one data size per model");
  }
  if (models.empty()) throw DomainError("aggregation over zero models");
  for (const auto& m : models) check_same_size(models.front(), m);

  // Canonical order (size, then parameters) makes the sum independent of input order.
  std::vector<std::size_t> idx(models.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (data_sizes[a] != data_sizes[b]) return data_sizes[a] < data_sizes[b];
    return models[a].values < models[b].values;
  });
  std::vector<std::size_t> sizes(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) sizes[i] = data_sizes[idx[i]];
  const auto mu = aggregation_weights(sizes, mode);

  // w0 + sum mu_i (w_i - w0): identical models fuse to exactly themselves.
  const ParamVector& w0 = models[idx.front()];
  ParamVector out(w0.size());
  for (std::size_t i = 1; i < idx.size(); ++i) {
    const ParamVector& wi = models[idx[i]];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += mu[i] * (wi[k] - w0[k]);
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = w0[k] + out[k];
  if (weight_scale != 1.0) out = scale(out, weight_scale);
  return out;
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string line = std::to_string(r.round);
  line += ',' + format_double(r.test_loss);
  line += ',' + format_double(r.test_acc);
  line += ',' + format_double(r.mean_client_loss);
  line += ',';
  if (r.group) line += format_double(r.group->loss_barrier);
  line += ',';
  if (r.group) line += format_double(r.group->acc_barrier);
  line += ',';
  for (std::size_t i = 0; i < r.clients.size(); ++i) {
    if (i > 0) line += ';';
    line += std::to_string(r.clients[i]);
  }
  return line;
}

std::pair<Dataset, Dataset> load_datasets(const DataSource& source) {
  if (const auto* blobs = std::get_if<BlobsSource>(&source)) return synth_blobs(blobs->params);
  const auto& idx = std::get<IdxSource>(source);
  auto train = load_idx(idx.train_images, idx.train_labels, Split::Train);
  auto test = load_idx(idx.test_images, idx.test_labels, Split::Test);
  const auto classes = std::max(train.num_classes, test.num_classes);
  train.num_classes = test.num_classes = classes;
  return {std::move(train), std::move(test)};
}

ModelSpec model_spec(const RunConfig& cfg, const Dataset& train) {
  ModelSpec spec;
  spec.layer_widths.push_back(train.input_dim());
  for (auto h : cfg.hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(train.num_classes);
  spec.bias = cfg.bias;
  spec.validate();
  return spec;
}

ClientPartition make_partition(const RunConfig& cfg, const Dataset& train) {
  const auto seed = derive_seed({cfg.seed, kTagPartition});
  return cfg.dirichlet_alpha ? dirichlet_partition(train, cfg.clients, *cfg.dirichlet_alpha, seed)
                             : iid_partition(train, cfg.clients, seed);
}

RunResult run_federated(const RunConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  const auto [train, test] = load_datasets(cfg.data);
  return run_federated(cfg, train, test, hooks);
}

RunResult run_federated(const RunConfig& cfg, const Dataset& train, const Dataset& test,
                        const RunHooks& hooks) {
  cfg.validate();
  RunResult result;
  result.spec = model_spec(cfg, train);
  result.partition = make_partition(cfg, train);
  check_partition(result.partition, train);

  std::vector<Batch> client_data;
  client_data.reserve(cfg.clients);
  for (const auto& rows : result.partition.assignments) client_data.push_back(train.examples.gather(rows));

  const ModelSpec& spec = result.spec;
  result.initial_global = init_params(spec, derive_seed({cfg.seed, kTagGlobalInit}));
  ParamVector global = result.initial_global;
  const std::size_t N = anchor_count(cfg.strategy);
  const LocalTraining training{cfg.local_epochs, cfg.batch_size, cfg.lr};
  const auto eval = network_evaluator(spec, test.examples);
  AnchorWindow window;

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    if (N > 0) window = anchor_window_update(std::move(window), global, t, N);
    const auto ids = sample_clients(cfg.clients, cfg.participation, t, cfg.seed);

    std::vector<LocalResult> locals(ids.size());
    kernels::parallel_for(ids.size(), [&](std::size_t k) {
      const std::size_t c = ids[k];
      Rng rng(derive_seed({cfg.seed, kTagClient, c, t}));
      try {
        locals[k] = local_update(global, spec, client_data[c], result.partition.class_counts[c],
                                 cfg.strategy, training, window.models, rng);
      } catch (const DivergenceError& e) {
        throw DivergenceError("round " + std::to_string(t) + ", client " + std::to_string(c) +
                              ": " + e.what());
      }
    });

    std::vector<ParamVector> models;
    std::vector<std::size_t> sizes;
    double client_loss = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      models.push_back(std::move(locals[k].params));
      sizes.push_back(client_data[ids[k]].size());
      client_loss += locals[k].mean_loss;
    }
    global = aggregate(models, sizes, cfg.aggregation, cfg.weight_scale);
    if (!global.all_finite()) {
      throw DivergenceError("round " + std::to_string(t) + ": non-finite global model");
    }

    if (hooks.on_round) hooks.on_round(RoundState{t, ids, models, &global, &window});

    const bool evaluated = t % cfg.eval_every == 0 || t == cfg.rounds;
    if (!evaluated) continue;
    MetricsRecord rec;
    rec.round = t;
    const auto ev = eval(global);
    rec.test_loss = ev.loss;
    rec.test_acc = ev.accuracy;
    rec.mean_client_loss = client_loss / static_cast<double>(ids.size());
    if (cfg.barrier_every > 0 && t % cfg.barrier_every == 0 && models.size() >= 2) {
      try {
        rec.group = group_barrier(models, eval);
      } catch (const DegenerateAccuracyError&) {
        rec.group.reset();
      }
    }
    rec.clients = ids;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (hooks.on_record) hooks.on_record(rec);
    result.records.push_back(std::move(rec));
  }
  result.final_global = std::move(global);
  return result;
}

}  // namespace gucci
