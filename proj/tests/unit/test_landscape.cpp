#include "doctest.h"

#include <atomic>
#include <cmath>

#include "gucci/error.hpp"
#include "gucci/landscape.hpp"
#include "support.hpp"

using namespace gucci;

namespace {

ParamVector scalar(double v) { return ParamVector(std::vector<double>{v}); }

// Closed-form evaluators on one parameter; accuracy is any positive proxy.
PointEvaluator square() {
  return [](const ParamVector& p) { return EvalResult{p[0] * p[0], 1.0 / (1.0 + p[0] * p[0])}; };
}

PointEvaluator double_well() {
  return [](const ParamVector& p) {
    const double q = p[0] * p[0] - 1.0;
    return EvalResult{q * q, 1.0 / (1.0 + q * q)};
  };
}

}  // namespace

TEST_CASE("sweep grid and endpoints") {
  const auto s = sweep(scalar(1.0), scalar(-1.0), square(), 5);
  CHECK(s.alphas == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(s.losses.front() == 1.0);  // alpha = 0 is the w2 end
  CHECK(s.losses[2] == 0.0);
  CHECK_THROWS_AS(sweep(scalar(1.0), scalar(0.0), square(), 1), DomainError);
}

TEST_CASE("barrier of w^2 between -1 and 1") {
  // L(alpha) = (2 alpha - 1)^2 never rises above the flat chord of 1.
  const auto r = barrier_report(sweep(scalar(1.0), scalar(-1.0), square(), 21));
  CHECK(r.loss_barrier == 0.0);
  CHECK(r.argmax_alpha_loss == 0.0);
  CHECK(r.acc_barrier == 0.0);  // accuracy proxy peaks mid-path
}

TEST_CASE("barrier of the double well") {
  const auto r = barrier_report(sweep(scalar(1.0), scalar(-1.0), double_well(), 21));
  CHECK(r.loss_barrier == doctest::Approx(1.0));
  CHECK(r.argmax_alpha_loss == doctest::Approx(0.5));
  CHECK(r.acc_barrier == doctest::Approx(0.5));  // 1 - (1/2) / 1
}

TEST_CASE("convex losses have zero barrier") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    const auto s = sweep(scalar(a), scalar(b), square(), 21);
    const auto lb = loss_barrier(s);
    CHECK(lb.barrier <= 1e-12);
    CHECK(lb.barrier >= 0.0);  // the endpoints are on the chord
  }
}

TEST_CASE("barrier ties resolve to the smallest alpha") {
  const auto flat = [](const ParamVector&) { return EvalResult{2.0, 0.5}; };
  const auto r = barrier_report(sweep(scalar(0.0), scalar(1.0), flat, 11));
  CHECK(r.loss_barrier == 0.0);
  CHECK(r.acc_barrier == 0.0);
  CHECK(r.argmax_alpha_loss == 0.0);
  CHECK(r.argmax_alpha_acc == 0.0);
}

TEST_CASE("identical endpoints give exactly zero barriers") {
  const auto in = testing::random_instance(31);
  const auto r = barrier_report(sweep(in.w, in.w, in.spec, in.batch, 21));
  CHECK(r.loss_barrier == 0.0);
  CHECK(r.acc_barrier == 0.0);
}

TEST_CASE("nested refinement never lowers the barrier") {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto in = testing::random_instance(300 + t);
    const auto other = init_params(in.spec, 900 + t);
    double prev = -1e300;
    for (std::size_t n : {3, 5, 9, 17, 33}) {
      const double b = loss_barrier(sweep(in.w, other, in.spec, in.batch, n)).barrier;
      CHECK(b >= prev);
      prev = b;
    }
  }
}

TEST_CASE("zero reference accuracy is degenerate") {
  const auto zero = [](const ParamVector&) { return EvalResult{1.0, 0.0}; };
  const auto s = sweep(scalar(0.0), scalar(1.0), zero, 5);
  CHECK_THROWS_AS(accuracy_barrier(s), DegenerateAccuracyError);
  CHECK_NOTHROW(loss_barrier(s));
}

TEST_CASE("group barrier") {
  SUBCASE("copies of one model give exactly zero") {
    auto in = testing::random_instance(41);
    in.batch.labels = std::vector<int>(in.batch.size(), static_cast<int>(argmax(forward(in.w, in.spec, in.batch.inputs).row(0))));
    const std::vector<ParamVector> copies(4, in.w);
    const auto g = group_barrier(copies, in.spec, in.batch);
    CHECK(g.loss_barrier == 0.0);
    CHECK(g.acc_barrier == 0.0);
  }
  SUBCASE("closed form on w^2") {
    const std::vector<ParamVector> ms{scalar(1.0), scalar(-1.0), scalar(2.0)};
    // mean = 2/3: L = 4/9; mean L = 2
    CHECK(group_barrier(ms, square()).loss_barrier == doctest::Approx(4.0 / 9.0 - 2.0));
  }
  SUBCASE("K = 2 is the pair barrier at the midpoint") {
    for (std::uint64_t seed = 50; seed < 60; ++seed) {
      const auto in = testing::random_instance(seed);
      const auto other = init_params(in.spec, seed + 1000);
      const std::vector<ParamVector> pair{in.w, other};
      const auto net = network_evaluator(in.spec, in.batch);
      const PointEvaluator loss_only = [&](const ParamVector& p) { return EvalResult{net(p).loss, 1.0}; };
      const auto g = group_barrier(pair, loss_only);
      const auto s = sweep(in.w, other, loss_only, 21);
      CHECK(g.loss_barrier <= loss_barrier(s).barrier + 1e-12);
      const auto mid = s.losses[10] - 0.5 * (s.losses.front() + s.losses.back());
      CHECK(g.loss_barrier == doctest::Approx(mid).epsilon(1e-12));
    }
  }
  SUBCASE("fewer than two models is rejected") {
    const std::vector<ParamVector> one{scalar(1.0)};
    CHECK_THROWS_AS(group_barrier(one, square()), DomainError);
  }
}

TEST_CASE("plane grid") {
  const auto in = testing::random_instance(61);
  const auto w2 = init_params(in.spec, 62);
  const auto w3 = init_params(in.spec, 63);
  std::atomic<int> calls{0};
  const auto base = network_evaluator(in.spec, in.batch);
  const PointEvaluator counted = [&](const ParamVector& p) {
    ++calls;
    return base(p);
  };
  const std::size_t r = 7;
  const auto g = plane_grid(in.w, w2, w3, counted, r, 0.2);
  CHECK(calls == static_cast<int>(r * r + 3));
  CHECK(g.losses.size() == r * r);
  CHECK(g.accuracies.size() == r * r);
  CHECK(std::abs(dot(g.axis_u, g.axis_v)) < 1e-12);
  CHECK(norm2(g.axis_u) == doctest::Approx(1.0));
  CHECK(norm2(g.axis_v) == doctest::Approx(1.0));

  const std::vector<const ParamVector*> models{&in.w, &w2, &w3};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto back = g.to_params(g.marker_coords[k][0], g.marker_coords[k][1]);
    CHECK(norm2(subtract(back, *models[k])) < 1e-9);
    const auto direct = base(*models[k]);
    CHECK(g.marker_values[k].loss == doctest::Approx(direct.loss).epsilon(1e-9));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(g.marker_coords[k][0] >= g.xs.front());
    CHECK(g.marker_coords[k][0] <= g.xs.back());
    CHECK(g.marker_coords[k][1] >= g.ys.front());
    CHECK(g.marker_coords[k][1] <= g.ys.back());
  }

  const auto mid = combine(in.w, w2, 0.5);
  CHECK_THROWS_AS(plane_grid(in.w, w2, mid, base, r, 0.2), DomainError);
  CHECK_THROWS_AS(plane_grid(in.w, in.w, w3, base, r, 0.2), DomainError);
  CHECK_THROWS_AS(plane_grid(in.w, w2, w3, base, 1, 0.2), DomainError);
}

TEST_CASE("pair bound hand example") {
  BoundInputs in;
  in.h = 1;
  in.l = 1;
  in.b = 1.0;
  in.delta = 0.5;
  in.d_eps = 1.0;
  in.d_anc = 0.0;
  const double expected = std::sqrt(2.0) * std::log(24.0);
  CHECK(barrier_upper_bound(BoundKind::Pair, in) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(barrier_upper_bound(BoundKind::Pair, in) == doctest::Approx(4.4944).epsilon(1e-4));
}

TEST_CASE("group bound with K = 1 differs from pair only in the log") {
  BoundInputs in;
  in.h = 3;
  in.l = 2;
  in.b = 1.5;
  in.delta = 0.2;
  in.d_eps = 0.7;
  in.d_anc = 0.4;
  in.K = 1;
  in.Gamma = 0.0;
  in.d_eps_shifted = in.d_eps;
  const double ratio = barrier_upper_bound(BoundKind::Group, in) / barrier_upper_bound(BoundKind::Pair, in);
  CHECK(ratio == doctest::Approx(std::log(4.0 * 3 / 0.2) / std::log(12.0 * 3 / 0.2)).epsilon(1e-12));
}

TEST_CASE("bounds grow with anchor distance, input norm and group size") {
  BoundInputs in;
  in.h = 4;
  in.l = 3;
  double prev = 0.0;
  for (double d_anc : {0.0, 0.5, 1.0, 2.0}) {
    in.d_anc = d_anc;
    const double v = barrier_upper_bound(BoundKind::Pair, in);
    CHECK(v > prev);
    prev = v;
  }
  prev = 0.0;
  for (double b : {0.5, 1.0, 2.0}) {
    in.b = b;
    const double v = barrier_upper_bound(BoundKind::Pair, in);
    CHECK(v > prev);
    prev = v;
  }
  prev = 0.0;
  for (std::size_t K : {1, 2, 4, 8}) {
    in.K = K;
    const double v = barrier_upper_bound(BoundKind::Group, in);
    CHECK(v > prev);
    prev = v;
  }
  in.delta = 1.0;
  CHECK_THROWS_AS(barrier_upper_bound(BoundKind::Pair, in), DomainError);
}

TEST_CASE("lemma1 half-width") {
  CHECK(lemma1_max_halfwidth(1.0, 0.5, 1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(lemma1_max_halfwidth(1.3, 1e-12, 10) == doctest::Approx(1.3).epsilon(1e-10));
  double prev = 0.0;
  for (double delta : {0.1, 0.3, 0.5, 0.9}) {
    const double v = lemma1_max_halfwidth(1.0, delta, 4);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(lemma1_max_halfwidth(1.0, 0.0, 1), DomainError);
  CHECK_THROWS_AS(lemma1_max_halfwidth(1.0, 0.5, 0), DomainError);
}
