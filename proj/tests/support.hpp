#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gucci/nn_core.hpp"
#include "gucci/optim.hpp"
#include "gucci/rng.hpp"

namespace testing {

using namespace gucci;

/// Central finite differences of a scalar function of the parameters.
inline ParamVector fd_gradient(const std::function<double(const ParamVector&)>& f,
                               const ParamVector& w, double h = 1e-5) {
  ParamVector g(w.size());
  ParamVector p = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), with a floor so all-zero pairs compare equal.
inline double rel_error(const ParamVector& a, const ParamVector& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, Rng& rng) {
  Batch b;
  b.inputs = Matrix(n, dim);
  for (double& v : b.inputs.data) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.uniform_index(classes)));
  return b;
}

/// Small random network with 1 or 2 hidden layers.
struct Instance {
  ModelSpec spec;
  ParamVector w;
  Batch batch;
};

inline Instance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  Instance in;
  const std::size_t dim = 2 + rng.uniform_index(3);
  const std::size_t classes = 2 + rng.uniform_index(3);
  in.spec.layer_widths = {dim, 3 + rng.uniform_index(4)};
  if (rng.uniform() < 0.5) in.spec.layer_widths.push_back(2 + rng.uniform_index(4));
  in.spec.layer_widths.push_back(classes);
  in.spec.bias = rng.uniform() < 0.75;
  in.w = init_params(in.spec, seed);
  for (double& v : in.w.values) v *= 2.0;  // move pre-activations away from zero
  in.batch = random_batch(4 + rng.uniform_index(6), dim, classes, rng);
  return in;
}

inline ParamVector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  ParamVector v(n);
  for (double& x : v.values) x = scale * rng.normal();
  return v;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gucci_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
