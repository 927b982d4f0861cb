#include "gucci/kernels.hpp"

#include <cstdlib>
#include <exception>
#include <vector>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gucci::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;
}  // namespace

namespace serial {

void dense_forward(std::span<const double> x, std::size_t n, std::size_t in,
                   std::span<const double> w, std::span<const double> b, std::size_t out,
                   std::span<double> y) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t k = 0; k < in; ++k) acc += x[r * in + k] * w[o * in + k];
      y[r * out + o] = acc;
    }
  }
}

void dense_weight_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                       std::span<const double> x, std::size_t in, std::span<double> dw,
                       std::span<double> db) {
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o] * x[r * in + k];
      dw[o * in + k] = acc;
    }
    if (!db.empty()) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o];
      db[o] = acc;
    }
  }
}

void dense_input_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                      std::span<const double> w, std::size_t in, std::span<double> dx) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dy[r * out + o] * w[o * in + k];
      dx[r * in + k] = acc;
    }
  }
}

}  // namespace serial

void dense_forward(std::span<const double> x, std::size_t n, std::size_t in,
                   std::span<const double> w, std::span<const double> b, std::size_t out,
                   std::span<double> y) {
  const bool has_bias = !b.empty();
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * in * out >= kParallelWork)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    double* yr = y.data() + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.data() + o * in;
      double acc = has_bias ? b[o] : 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wo[k];
      yr[o] = acc;
    }
  }
}

void dense_weight_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                       std::span<const double> x, std::size_t in, std::span<double> dw,
                       std::span<double> db) {
  const bool has_bias = !db.empty();
  const auto outs = static_cast<std::ptrdiff_t>(out);
#pragma omp parallel for schedule(static) if (n * in * out >= kParallelWork)
  for (std::ptrdiff_t o = 0; o < outs; ++o) {
    double* dwo = dw.data() + o * in;
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o] * x[r * in + k];
      dwo[k] = acc;
    }
    if (has_bias) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o];
      db[o] = acc;
    }
  }
}

void dense_input_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                      std::span<const double> w, std::size_t in, std::span<double> dx) {
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * in * out >= kParallelWork)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* dyr = dy.data() + r * out;
    double* dxr = dx.data() + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dyr[o] * w[o * in + k];
      dxr[k] = acc;
    }
  }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) if (n > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("GUCCI_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) set_num_threads(n);
    } catch (const std::exception&) {
      // Unparseable values leave the OpenMP default in place.
    }
  }
  return max_threads();
}

}  // namespace gucci::kernels
