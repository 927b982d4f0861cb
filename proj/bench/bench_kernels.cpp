#include <benchmark/benchmark.h>

#include <vector>

#include "gucci/kernels.hpp"
#include "gucci/rng.hpp"

namespace {

using namespace gucci;

struct Layer {
  std::size_t n, in, out;
  std::vector<double> x, w, b, y, dy, dw, db, dx;

  Layer(std::size_t n_, std::size_t in_, std::size_t out_)
      : n(n_), in(in_), out(out_), x(n * in), w(out * in), b(out), y(n * out), dy(n * out),
        dw(out * in), db(out), dx(n * in) {
    Rng rng(42);
    for (auto* v : {&x, &w, &b, &dy}) {
      for (double& e : *v) e = rng.uniform(-1.0, 1.0);
    }
  }
};

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer L(n, 256, 256);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_forward(L.x, L.n, L.in, L.w, L.b, L.out, L.y);
    } else {
      kernels::serial::dense_forward(L.x, L.n, L.in, L.w, L.b, L.out, L.y);
    }
    benchmark::DoNotOptimize(L.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * L.in * L.out));
}

template <bool Parallel>
void BM_WeightGrad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer L(n, 256, 256);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_weight_grad(L.dy, L.n, L.out, L.x, L.in, L.dw, L.db);
    } else {
      kernels::serial::dense_weight_grad(L.dy, L.n, L.out, L.x, L.in, L.dw, L.db);
    }
    benchmark::DoNotOptimize(L.dw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * L.in * L.out));
}

template <bool Parallel>
void BM_InputGrad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer L(n, 256, 256);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_input_grad(L.dy, L.n, L.out, L.w, L.in, L.dx);
    } else {
      kernels::serial::dense_input_grad(L.dy, L.n, L.out, L.w, L.in, L.dx);
    }
    benchmark::DoNotOptimize(L.dx.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * L.in * L.out));
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Name("forward/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_Forward<true>)->Name("forward/openmp")->Arg(32)->Arg(256)->UseRealTime();
BENCHMARK(BM_WeightGrad<false>)->Name("weight_grad/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_WeightGrad<true>)->Name("weight_grad/openmp")->Arg(32)->Arg(256)->UseRealTime();
BENCHMARK(BM_InputGrad<false>)->Name("input_grad/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_InputGrad<true>)->Name("input_grad/openmp")->Arg(32)->Arg(256)->UseRealTime();

BENCHMARK_MAIN();
