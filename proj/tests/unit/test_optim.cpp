#include "doctest.h"

#include <cmath>
#include <limits>

#include "gucci/error.hpp"
#include "support.hpp"

using namespace gucci;

namespace {

// L(w) = sum_i (w_i - c_i)^2 with gradient 2 (w - c).
Objective quadratic(std::vector<double> c) {
  return [c](const ParamVector& w) {
    LossGrad lg{0.0, ParamVector(w.size())};
    for (std::size_t i = 0; i < w.size(); ++i) {
      lg.loss += (w[i] - c[i]) * (w[i] - c[i]);
      lg.grad[i] = 2.0 * (w[i] - c[i]);
    }
    return lg;
  };
}

ParamVector scalar(double v) { return ParamVector(std::vector<double>{v}); }

}  // namespace

TEST_CASE("SAM step on w^2") {
  int calls = 0;
  const Objective f = [&](const ParamVector& w) {
    ++calls;
    return LossGrad{w[0] * w[0], scalar(2.0 * w[0])};
  };
  const auto w = sam_step(scalar(1.0), f, SamSpec{0.5}, 0.1);
  CHECK(w[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(calls == 2);
}

TEST_CASE("SAM with a zero gradient does not perturb") {
  std::vector<ParamVector> seen;
  const Objective f = [&](const ParamVector& w) {
    seen.push_back(w);
    return LossGrad{0.0, ParamVector(w.size())};
  };
  const auto w0 = ParamVector(std::vector<double>{1.0, -2.0});
  CHECK(sam_step(w0, f, SamSpec{0.3}, 0.5) == w0);
  REQUIRE(seen.size() == 2);
  CHECK(seen[1] == w0);
  CHECK_THROWS_AS(SamSpec{0.0}.validate(), DomainError);
}

TEST_CASE("SAM perturbation has length rho") {
  std::vector<ParamVector> seen;
  const auto base = quadratic({0.5, -1.0, 2.0});
  const Objective f = [&](const ParamVector& w) {
    seen.push_back(w);
    return base(w);
  };
  const auto w0 = ParamVector(std::vector<double>{3.0, 1.0, -1.0});
  sam_step(w0, f, SamSpec{0.25}, 0.1);
  CHECK(norm2(subtract(seen[1], seen[0])) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("proximal term") {
  const ParamVector w(std::vector<double>{1.0, 3.0}), ref(std::vector<double>{0.0, 1.0});
  const auto lg = proximal_grad(w, ref, 0.5);
  CHECK(lg.loss == doctest::Approx(0.25 * (1.0 + 4.0)));
  CHECK(lg.grad == ParamVector(std::vector<double>{0.5, 1.0}));
  CHECK_THROWS_AS(proximal_grad(w, ref, -1.0), DomainError);

  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto a = testing::random_vector(6, rng), b = testing::random_vector(6, rng);
    const double mu = rng.uniform(0.01, 3.0);
    const auto fd = testing::fd_gradient([&](const ParamVector& p) { return proximal_grad(p, b, mu).loss; }, a);
    CHECK(testing::rel_error(proximal_grad(a, b, mu).grad, fd) < 1e-4);
  }
}

TEST_CASE("sgd_step") {
  const ParamVector w(std::vector<double>{1.0, 2.0});
  CHECK(sgd_step(w, ParamVector(std::vector<double>{1.0, -1.0}), 0.5) ==
        ParamVector(std::vector<double>{0.5, 2.5}));
  CHECK(sgd_step(w, ParamVector(std::vector<double>{4.0, 4.0}), 0.0) == w);
  ParamVector bad(std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 0.0});
  CHECK_THROWS_AS(sgd_step(w, bad, 0.1), DivergenceError);
}

TEST_CASE("alpha draws") {
  Rng rng(4);
  const Rng before = rng;
  const auto grid = draw_alphas(FixedGrid{4}, 2, rng);
  CHECK(grid.size() == 2);
  CHECK(grid[0] == std::vector<double>{0.125, 0.375, 0.625, 0.875});
  CHECK(grid[1] == grid[0]);
  Rng probe = before;
  CHECK(probe.next_u64() == rng.next_u64());  // grid consumed nothing

  const auto mc = draw_alphas(MonteCarlo{3}, 4, rng);
  CHECK(mc.size() == 4);
  for (const auto& a : mc) {
    CHECK(a.size() == 3);
    for (double x : a) CHECK((x >= 0.0 && x < 1.0));
  }
}

TEST_CASE("connectivity term edge cases") {
  const auto base = quadratic({1.0});
  Rng rng(1);
  const Rng before = rng;
  const std::vector<ParamVector> anchors{scalar(0.0)};
  const auto zero = connectivity_loss_grad(scalar(2.0), anchors, base, ConnectivitySpec{0.0, MonteCarlo{1}}, rng);
  CHECK(zero.loss == 0.0);
  CHECK(zero.grad == scalar(0.0));
  Rng probe = before;
  CHECK(probe.next_u64() == rng.next_u64());  // beta = 0 consumed nothing

  CHECK_THROWS_AS(connectivity_loss_grad(scalar(2.0), {}, base, ConnectivitySpec{0.5, MonteCarlo{1}}, rng),
                  DomainError);
  CHECK_THROWS_AS((ConnectivitySpec{-0.1, MonteCarlo{1}}.validate()), DomainError);
  CHECK_THROWS_AS((ConnectivitySpec{0.5, FixedGrid{0}}.validate()), DomainError);
}

TEST_CASE("connectivity term on a quadratic: closed form") {
  // Anchor at the origin, L(x) = x^2: beta * int_0^1 (alpha w)^2 = beta w^2 / 3.
  const auto base = quadratic({0.0});
  const std::vector<ParamVector> anchors{scalar(0.0)};
  const double beta = 0.5, w = 1.7;
  const std::vector<std::vector<double>> alphas{{0.3}};
  const auto one = connectivity_loss_grad_at(scalar(w), anchors, base, beta, alphas);
  CHECK(one.loss == doctest::Approx(beta * 0.09 * w * w));
  CHECK(one.grad[0] == doctest::Approx(beta * 2.0 * 0.09 * w));  // chain rule carries alpha

  Rng rng(0);
  const auto q = connectivity_loss_grad(scalar(w), anchors, base, ConnectivitySpec{beta, FixedGrid{101}}, rng);
  const double exact = beta * w * w / 3.0;
  CHECK(std::abs(q.loss - exact) / exact < 1e-3);
}

TEST_CASE("midpoint quadrature error shrinks fourfold per doubling") {
  const auto base = quadratic({0.4, -0.2});
  const std::vector<ParamVector> anchors{ParamVector(std::vector<double>{-1.0, 1.0})};
  const ParamVector w(std::vector<double>{2.0, 0.5});
  // Exact: int_0^1 |alpha (w - a) + a - c|^2 d alpha = |d|^2/3 + d.e + |e|^2, d = w - a, e = a - c.
  const double d0 = 3.0, d1 = -0.5, e0 = -1.4, e1 = 1.2;
  const double exact = (d0 * d0 + d1 * d1) / 3.0 + (d0 * e0 + d1 * e1) + (e0 * e0 + e1 * e1);
  Rng rng(0);
  double prev = 0.0;
  for (int k : {10, 20, 40, 80}) {
    const auto r = connectivity_loss_grad(w, anchors, base, ConnectivitySpec{1.0, FixedGrid{k}}, rng);
    const double err = std::abs(r.loss - exact);
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.2));
    prev = err;
  }
}

TEST_CASE("connectivity gradient matches finite differences on networks") {
  for (std::uint64_t seed = 200; seed < 225; ++seed) {
    const auto in = testing::random_instance(seed);
    Rng rng(seed);
    std::vector<ParamVector> anchors;
    const std::size_t A = 1 + rng.uniform_index(3);
    for (std::size_t j = 0; j < A; ++j) anchors.push_back(init_params(in.spec, seed * 10 + j));
    const auto alphas = draw_alphas(MonteCarlo{2}, A, rng);
    const Objective base = [&](const ParamVector& p) { return loss_and_grad(p, in.spec, in.batch); };
    const double beta = rng.uniform(0.1, 2.0);
    const auto lg = connectivity_loss_grad_at(in.w, anchors, base, beta, alphas);
    const auto fd = testing::fd_gradient(
        [&](const ParamVector& p) { return connectivity_loss_grad_at(p, anchors, base, beta, alphas).loss; },
        in.w);
    CHECK(testing::rel_error(lg.grad, fd) < 1e-4);
  }
}
