#pragma once

#include <cstddef>
#include <functional>
#include <span>

// Dense-layer kernels. Every output element is accumulated in the same
// index order by the serial and the OpenMP variants, so both produce
// bit-identical results for any thread count.
namespace gucci::kernels {

/// y[n x out] = x[n x in] * w[out x in]^T + b[out]; b may be empty.
void dense_forward(std::span<const double> x, std::size_t n, std::size_t in,
                   std::span<const double> w, std::span<const double> b, std::size_t out,
                   std::span<double> y);

/// dw[out x in] = dy^T * x; db[out] = column sums of dy (skipped if empty).
void dense_weight_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                       std::span<const double> x, std::size_t in, std::span<double> dw,
                       std::span<double> db);

/// dx[n x in] = dy[n x out] * w[out x in].
void dense_input_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                      std::span<const double> w, std::size_t in, std::span<double> dx);

namespace serial {

void dense_forward(std::span<const double> x, std::size_t n, std::size_t in,
                   std::span<const double> w, std::span<const double> b, std::size_t out,
                   std::span<double> y);

void dense_weight_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                       std::span<const double> x, std::size_t in, std::span<double> dw,
                       std::span<double> db);

void dense_input_grad(std::span<const double> dy, std::size_t n, std::size_t out,
                      std::span<const double> w, std::size_t in, std::span<double> dx);

}  // namespace serial

/// Runs body(i) for i in [0, n) across OpenMP threads. Exceptions are
/// captured per index; the one from the lowest index is rethrown after the loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Caps OpenMP worker threads (no-op without OpenMP).
void set_num_threads(int n);
int max_threads();

/// Applies GUCCI_THREADS from the environment if set. Returns the cap in effect.
int configure_threads_from_env();

}  // namespace gucci::kernels
