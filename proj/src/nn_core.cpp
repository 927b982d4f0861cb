#include "gucci/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gucci/error.hpp"
#include "gucci/kernels.hpp"
#include "gucci/rng.hpp"

namespace gucci {

void ModelSpec::validate() const {
  if (layer_widths.size() < 2) throw DomainError("model needs at least an input and an output width");
  for (auto w : layer_widths) {
    if (w == 0) throw DomainError("layer widths must be >= 1");
  }
}

std::size_t ModelSpec::param_count() const {
  std::size_t s = 0;
  for (std::size_t k = 0; k + 1 < layer_widths.size(); ++k) {
    s += layer_widths[k] * layer_widths[k + 1] + (bias ? layer_widths[k + 1] : 0);
  }
  return s;
}

std::size_t ModelSpec::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < layer; ++k) {
    off += layer_widths[k] * layer_widths[k + 1] + (bias ? layer_widths[k + 1] : 0);
  }
  return off;
}

bool ParamVector::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Batch Batch::gather(std::span<const std::size_t> rows) const {
  Batch out;
  out.inputs = Matrix(rows.size(), inputs.cols);
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = inputs.row(rows[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

namespace {

struct LayerView {
  std::span<const double> w;
  std::span<const double> b;
  std::size_t in;
  std::size_t out;
};

LayerView layer_view(const ParamVector& p, const ModelSpec& spec, std::size_t k) {
  const std::size_t in = spec.layer_widths[k];
  const std::size_t out = spec.layer_widths[k + 1];
  const std::size_t off = spec.weight_offset(k);
  LayerView v{p.span().subspan(off, in * out), {}, in, out};
  if (spec.bias) v.b = p.span().subspan(off + in * out, out);
  return v;
}

void check_params(const ParamVector& params, const ModelSpec& spec) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, model expects " + std::to_string(spec.param_count()));
  }
}

void check_inputs(const ModelSpec& spec, const Matrix& inputs) {
  if (inputs.cols != spec.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.cols) + " columns, model expects " +
                     std::to_string(spec.input_dim()));
  }
}

// Pre-activations z[k] for every layer; z.back() holds the logits.
std::vector<Matrix> forward_pass(const ParamVector& params, const ModelSpec& spec,
                                 const Matrix& inputs) {
  const std::size_t n = inputs.rows;
  std::vector<Matrix> z;
  z.reserve(spec.num_layers());
  const Matrix* a = &inputs;
  Matrix hidden;
  for (std::size_t k = 0; k < spec.num_layers(); ++k) {
    const auto layer = layer_view(params, spec, k);
    Matrix zk(n, layer.out);
    kernels::dense_forward(a->data, n, layer.in, layer.w, layer.b, layer.out, zk.data);
    z.push_back(std::move(zk));
    if (k + 1 < spec.num_layers()) {
      hidden = z.back();
      for (double& v : hidden.data) v = v > 0.0 ? v : 0.0;
      a = &hidden;
    }
  }
  return z;
}

}  // namespace

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p(spec.param_count());
  Rng rng(derive_seed({seed, 0x696e6974ULL}));
  std::size_t idx = 0;
  for (std::size_t k = 0; k < spec.num_layers(); ++k) {
    const double fan_in = static_cast<double>(spec.layer_widths[k]);
    const double fan_out = static_cast<double>(spec.layer_widths[k + 1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t count =
        spec.layer_widths[k] * spec.layer_widths[k + 1] + (spec.bias ? spec.layer_widths[k + 1] : 0);
    for (std::size_t i = 0; i < count; ++i) p[idx++] = rng.uniform(-a, a);
  }
  return p;
}

Matrix forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs) {
  check_params(params, spec);
  check_inputs(spec, inputs);
  return std::move(forward_pass(params, spec, inputs).back());
}

LossGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                       const LossKind& loss) {
  check_params(params, spec);
  check_inputs(spec, batch.inputs);
  if (batch.labels.size() != batch.inputs.rows) throw ShapeError("batch labels/rows mismatch");

  const std::size_t n = batch.inputs.rows;
  const std::size_t layers = spec.num_layers();
  const auto z = forward_pass(params, spec, batch.inputs);
  auto head = logit_loss(loss, z.back(), batch.labels);

  LossGrad out{head.loss, ParamVector(params.size())};
  Matrix dz = std::move(head.grad);
  Matrix a_prev;
  for (std::size_t k = layers; k-- > 0;) {
    const auto layer = layer_view(params, spec, k);
    const std::size_t off = spec.weight_offset(k);
    std::span<double> dw = out.grad.span().subspan(off, layer.in * layer.out);
    std::span<double> db;
    if (spec.bias) db = out.grad.span().subspan(off + layer.in * layer.out, layer.out);

    // Input activations of layer k: raw inputs or ReLU(z[k-1]).
    const Matrix* a = &batch.inputs;
    if (k > 0) {
      a_prev = z[k - 1];
      for (double& v : a_prev.data) v = v > 0.0 ? v : 0.0;
      a = &a_prev;
    }
    kernels::dense_weight_grad(dz.data, n, layer.out, a->data, layer.in, dw, db);

    if (k > 0) {
      Matrix da(n, layer.in);
      kernels::dense_input_grad(dz.data, n, layer.out, layer.w, layer.in, da.data);
      const Matrix& zprev = z[k - 1];
      for (std::size_t i = 0; i < da.data.size(); ++i) {
        if (!(zprev.data[i] > 0.0)) da.data[i] = 0.0;
      }
      dz = std::move(da);
    }
  }
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

EvalResult evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& data) {
  if (data.size() == 0 || data.inputs.rows == 0) throw DomainError("cannot evaluate on an empty dataset");
  const Matrix logits = forward(params, spec, data.inputs);
  const auto ce = cross_entropy(logits, data.labels);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    if (argmax(logits.row(r)) == static_cast<std::size_t>(data.labels[r])) ++correct;
  }
  return {ce.loss, static_cast<double>(correct) / static_cast<double>(logits.rows)};
}

void check_same_size(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("parameter vectors differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

ParamVector combine(const ParamVector& w1, const ParamVector& w2, double alpha) {
  check_same_size(w1, w2);
  ParamVector out(w1.size());
  const double beta = 1.0 - alpha;
  // Coordinates shared by both endpoints stay exact for every alpha.
  for (std::size_t i = 0; i < w1.size(); ++i) {
    out[i] = w1[i] == w2[i] ? w1[i] : alpha * w1[i] + beta * w2[i];
  }
  return out;
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
  check_same_size(a, b);
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  check_same_size(a, b);
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ParamVector scale(const ParamVector& a, double s) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

void axpy(ParamVector& a, double s, const ParamVector& b) {
  check_same_size(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

double dot(const ParamVector& a, const ParamVector& b) {
  check_same_size(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const ParamVector& a) { return std::sqrt(dot(a, a)); }

ParamVector mean(std::span<const ParamVector> models) {
  if (models.empty()) throw DomainError("mean of zero models");
  // m0 + sum(m_i - m0) / K keeps coordinates shared by all models exact.
  const ParamVector& first = models.front();
  ParamVector acc(first.size());
  for (const auto& m : models.subspan(1)) {
    check_same_size(first, m);
    for (std::size_t i = 0; i < m.size(); ++i) acc[i] += m[i] - first[i];
  }
  const auto k = static_cast<double>(models.size());
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = first[i] + acc[i] / k;
  return acc;
}

}  // namespace gucci
