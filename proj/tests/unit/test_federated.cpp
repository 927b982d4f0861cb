#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gucci/error.hpp"
#include "gucci/federated.hpp"
#include "gucci/kernels.hpp"
#include "support.hpp"

using namespace gucci;

namespace {

ParamVector scalar(double v) { return ParamVector(std::vector<double>{v}); }

RunConfig small_run() {
  RunConfig cfg;
  cfg.data = BlobsSource{BlobsParams{3, 4, 40, 0.5, 3}};
  cfg.hidden = {8};
  cfg.clients = 4;
  cfg.rounds = 3;
  cfg.local_epochs = 1;
  cfg.batch_size = 16;
  cfg.lr = 0.1;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("anchor window keeps the most recent N globals") {
  AnchorWindow w;
  w = anchor_window_update(std::move(w), scalar(1.0), 1, 2);
  CHECK(w.rounds == std::vector<std::size_t>{1});
  w = anchor_window_update(std::move(w), scalar(2.0), 2, 2);
  w = anchor_window_update(std::move(w), scalar(3.0), 3, 2);
  CHECK(w.rounds == std::vector<std::size_t>{2, 3});
  CHECK(w.models[0] == scalar(2.0));
  CHECK(w.models[1] == scalar(3.0));
  CHECK(w.size() == 2);
  CHECK_THROWS_AS(anchor_window_update(w, scalar(0.0), 0, 2), DomainError);
  CHECK_THROWS_AS(anchor_window_update(w, scalar(0.0), 4, 0), DomainError);
}

TEST_CASE("client sampling") {
  const auto ids = sample_clients(10, 0.3, 4, 11);
  CHECK(ids.size() == 3);
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  for (auto c : ids) CHECK(c < 10);
  CHECK(ids == sample_clients(10, 0.3, 4, 11));
  CHECK(sample_clients(10, 1.0, 1, 0) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(sample_clients(10, 0.01, 1, 0).size() == 1);
  CHECK(sample_clients(7, 0.5, 1, 0).size() == 4);

  bool varies = false;
  for (std::size_t t = 2; t < 10; ++t) varies |= sample_clients(10, 0.3, t, 11) != ids;
  CHECK(varies);
  CHECK_THROWS_AS(sample_clients(10, 0.0, 1, 0), DomainError);
}

TEST_CASE("aggregation weights") {
  const std::vector<std::size_t> sizes{1, 3, 7, 2};
  const auto w = aggregation_weights(sizes);
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(std::abs(s - 1.0) < 1e-15);
  CHECK(w[1] == doctest::Approx(3.0 / 13.0));
  const auto u = aggregation_weights(sizes, Aggregation::Uniform);
  for (double x : u) CHECK(x == 0.25);
}

TEST_CASE("aggregate") {
  SUBCASE("identical models fuse exactly") {
    Rng rng(3);
    const auto w = testing::random_vector(40, rng);
    const std::vector<ParamVector> ms(5, w);
    const std::vector<std::size_t> sizes{3, 1, 4, 1, 5};
    CHECK(aggregate(ms, sizes) == w);
    CHECK(aggregate(ms, sizes, Aggregation::Uniform) == w);
  }
  SUBCASE("size weighting") {
    const std::vector<ParamVector> ms{scalar(0.0), scalar(4.0)};
    const std::vector<std::size_t> sizes{1, 3};
    CHECK(aggregate(ms, sizes)[0] == doctest::Approx(3.0));
    CHECK(aggregate(ms, sizes, Aggregation::Uniform)[0] == doctest::Approx(2.0));
    CHECK(aggregate(ms, sizes, Aggregation::DataSize, 0.5)[0] == doctest::Approx(1.5));
  }
  SUBCASE("order of pairs does not matter") {
    Rng rng(8);
    std::vector<ParamVector> ms;
    std::vector<std::size_t> sizes;
    for (int i = 0; i < 6; ++i) {
      ms.push_back(testing::random_vector(25, rng));
      sizes.push_back(1 + rng.uniform_index(50));
    }
    const auto ref = aggregate(ms, sizes);
    std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
    for (int trial = 0; trial < 10; ++trial) {
      rng.shuffle(std::span<std::size_t>(perm));
      std::vector<ParamVector> pm;
      std::vector<std::size_t> ps;
      for (auto i : perm) {
        pm.push_back(ms[i]);
        ps.push_back(sizes[i]);
      }
      CHECK(aggregate(pm, ps) == ref);
    }
  }
  SUBCASE("bad input") {
    const std::vector<ParamVector> ms{scalar(0.0), scalar(1.0)};
    const std::vector<std::size_t> one{1};
    CHECK_THROWS(aggregate(ms, one));
    const std::vector<ParamVector> none;
    const std::vector<std::size_t> empty;
    CHECK_THROWS(aggregate(none, empty));
  }
}

TEST_CASE("strategy names and validation") {
  CHECK(strategy_name(FedAvg{}) == "fedavg");
  CHECK(strategy_name(FedGuCciPlus{}) == "fedgucci_plus");
  CHECK(anchor_count(FedGuCci{0.5, 4}) == 4);
  CHECK(anchor_count(FedProx{}) == 0);
  CHECK_THROWS_AS(validate(Strategy{FedProx{-1.0}}), DomainError);
  CHECK_THROWS_AS(validate(Strategy{FedGuCci{0.5, 0}}), DomainError);
  CHECK_NOTHROW(validate(Strategy{FedGuCci{0.0, 1}}));
}

TEST_CASE("local update") {
  const auto in = testing::random_instance(70);
  const std::vector<std::int64_t> counts(in.spec.num_classes(), 1);
  const std::vector<ParamVector> anchors{init_params(in.spec, 71)};

  SUBCASE("zero learning rate is the identity") {
    for (const Strategy& s : std::vector<Strategy>{FedAvg{}, FedProx{}, FedSAM{}, FedLC{}, FedGuCci{}, FedGuCciPlus{}}) {
      Rng rng(1);
      const auto r = local_update(in.w, in.spec, in.batch, counts, s, LocalTraining{2, 3, 0.0}, anchors, rng);
      CHECK(r.params == in.w);
    }
  }
  SUBCASE("step count keeps the last partial batch") {
    Rng rng(1);
    const auto r = local_update(in.w, in.spec, in.batch, counts, FedAvg{},
                                LocalTraining{3, in.batch.size() - 1, 0.01}, {}, rng);
    CHECK(r.steps == 6);
    CHECK(std::isfinite(r.mean_loss));
  }
  SUBCASE("beta = 0 matches FedAvg bit for bit") {
    Rng a(9), b(9);
    const LocalTraining tr{3, 2, 0.1};
    const auto x = local_update(in.w, in.spec, in.batch, counts, FedAvg{}, tr, {}, a);
    const auto y = local_update(in.w, in.spec, in.batch, counts, FedGuCci{0.0, 3}, tr, anchors, b);
    CHECK(x.params == y.params);
    CHECK(x.mean_loss == y.mean_loss);
  }
  SUBCASE("huge proximal weight pins the model") {
    Rng a(4), b(4);
    const LocalTraining tr{2, 3, 1e-7};
    const auto free = local_update(in.w, in.spec, in.batch, counts, FedAvg{}, tr, {}, a);
    const auto prox = local_update(in.w, in.spec, in.batch, counts, FedProx{1e6}, tr, {}, b);
    CHECK(norm2(subtract(prox.params, in.w)) < norm2(subtract(free.params, in.w)));
  }
  SUBCASE("plus variant reduces to FedAvg in the limit") {
    Rng a(5), b(5);
    const LocalTraining tr{2, 3, 0.05};
    const auto x = local_update(in.w, in.spec, in.batch, counts, FedAvg{}, tr, {}, a);
    const auto y = local_update(in.w, in.spec, in.batch, counts, FedGuCciPlus{0.0, 3, MonteCarlo{1}, 0.0, 1e-8},
                                tr, anchors, b);
    CHECK(norm2(subtract(x.params, y.params)) < 1e-6);
  }
  SUBCASE("divergence is reported") {
    Rng rng(2);
    auto huge = in.w;
    for (double& v : huge.values) v *= 1e200;
    CHECK_THROWS_AS(local_update(huge, in.spec, in.batch, counts, FedAvg{}, LocalTraining{1, 4, 1e200}, {}, rng),
                    DivergenceError);
  }
}

TEST_CASE("one client with full batches is centralized gradient descent") {
  auto cfg = small_run();
  cfg.clients = 1;
  cfg.rounds = 2;
  cfg.local_epochs = 3;
  cfg.batch_size = 1000;
  const auto [train, test] = load_datasets(cfg.data);
  const auto res = run_federated(cfg, train, test);
  auto w = res.initial_global;
  for (int step = 0; step < 6; ++step) w = sgd_step(w, loss_and_grad(w, res.spec, train.examples).grad, cfg.lr);
  CHECK(testing::rel_error(w, res.final_global) < 1e-10);
}

TEST_CASE("runs are reproducible and thread-count independent") {
  auto cfg = small_run();
  cfg.strategy = FedGuCci{0.5, 2, MonteCarlo{1}};
  cfg.participation = 0.5;
  const int saved = kernels::max_threads();
  kernels::set_num_threads(1);
  const auto a = run_federated(cfg);
  kernels::set_num_threads(8);
  const auto b = run_federated(cfg);
  kernels::set_num_threads(saved);
  CHECK(a.final_global == b.final_global);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(metrics_csv_row(a.records[i]) == metrics_csv_row(b.records[i]));
  }
}

TEST_CASE("FedGuCci with beta = 0 reproduces FedAvg runs") {
  auto cfg = small_run();
  const auto avg = run_federated(cfg);
  cfg.strategy = FedGuCci{0.0, 3, MonteCarlo{1}};
  const auto gucci = run_federated(cfg);
  CHECK(avg.final_global == gucci.final_global);
}

TEST_CASE("logged group barrier equals an offline recompute") {
  auto cfg = small_run();
  cfg.barrier_every = 1;
  const auto [train, test] = load_datasets(cfg.data);
  std::vector<GroupBarrier> offline;
  RunHooks hooks;
  ModelSpec spec;
  hooks.on_round = [&](const RoundState& s) {
    spec = model_spec(cfg, train);
    offline.push_back(group_barrier(s.locals, spec, test.examples));
    CHECK(s.locals.size() == s.clients.size());
    CHECK(s.global != nullptr);
  };
  const auto res = run_federated(cfg, train, test, hooks);
  REQUIRE(res.records.size() == offline.size());
  for (std::size_t i = 0; i < offline.size(); ++i) {
    REQUIRE(res.records[i].group.has_value());
    CHECK(res.records[i].group->loss_barrier == offline[i].loss_barrier);
    CHECK(res.records[i].group->acc_barrier == offline[i].acc_barrier);
  }
}

TEST_CASE("eval_every thins records but keeps the last round") {
  auto cfg = small_run();
  cfg.rounds = 5;
  cfg.eval_every = 2;
  std::vector<std::size_t> rounds;
  RunHooks hooks;
  hooks.on_record = [&](const MetricsRecord& r) { rounds.push_back(r.round); };
  run_federated(cfg, hooks);
  CHECK(rounds == std::vector<std::size_t>{2, 4, 5});
}

TEST_CASE("divergence names the round and client") {
  auto cfg = small_run();
  cfg.lr = 1e300;
  try {
    run_federated(cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("round 1") != std::string::npos);
    CHECK(msg.find("client") != std::string::npos);
  }
}

TEST_CASE("metrics CSV row") {
  MetricsRecord r;
  r.round = 3;
  r.test_loss = 0.5;
  r.test_acc = 0.75;
  r.mean_client_loss = 0.25;
  r.clients = {1, 4};
  CHECK(metrics_csv_row(r) == "3,0.5,0.75,0.25,,,1;4");
  r.group = GroupBarrier{0.125, -0.5};
  CHECK(metrics_csv_row(r) == "3,0.5,0.75,0.25,0.125,-0.5,1;4");
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.clients_per_round() == 10);
  cfg.participation = 0.3;
  CHECK(cfg.clients_per_round() == 3);
  cfg.participation = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg = RunConfig{};
  cfg.rounds = 0;
  CHECK_THROWS(cfg.validate());
  cfg = RunConfig{};
  cfg.dirichlet_alpha = -1.0;
  CHECK_THROWS(cfg.validate());
}
