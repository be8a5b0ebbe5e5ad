#include "fedlwf/nn.hpp"

#include <cmath>
#include <string>

#include "fedlwf/errors.hpp"
#include "fedlwf/random.hpp"

namespace fedlwf {

std::size_t ModelParams::in_dim() const {
  if (layers.empty()) throw ShapeError("model has no layers");
  return layers.front().weights.rows();
}

std::size_t ModelParams::n_classes() const {
  if (layers.empty()) throw ShapeError("model has no layers");
  return layers.back().weights.cols();
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void ModelParams::validate() const {
  if (layers.size() < 2) {
    throw ShapeError("model depth must be >= 2, got " + std::to_string(layers.size()));
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.size() != l.weights.cols()) {
      throw ShapeError("layer " + std::to_string(k) + ": bias has " +
                       std::to_string(l.bias.size()) + " entries, fan_out is " +
                       std::to_string(l.weights.cols()));
    }
    if (k > 0 && layers[k - 1].weights.cols() != l.weights.rows()) {
      throw ShapeError("layer " + std::to_string(k) + ": fan_in " +
                       std::to_string(l.weights.rows()) + " does not match previous fan_out " +
                       std::to_string(layers[k - 1].weights.cols()));
    }
  }
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams out;
  out.layers.reserve(like.layers.size());
  for (const auto& l : like.layers) {
    out.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                          std::vector<double>(l.bias.size(), 0.0)});
  }
  return out;
}

bool same_architecture(const ModelParams& a, const ModelParams& b) noexcept {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    const auto& la = a.layers[k];
    const auto& lb = b.layers[k];
    if (la.weights.rows() != lb.weights.rows() || la.weights.cols() != lb.weights.cols() ||
        la.bias.size() != lb.bias.size()) {
      return false;
    }
  }
  return true;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) noexcept {
  if (!same_architecture(a, b)) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (!bitwise_equal(a.layers[k].weights, b.layers[k].weights) ||
        !bitwise_equal(a.layers[k].bias, b.layers[k].bias)) {
      return false;
    }
  }
  return true;
}

void require_same_architecture(const ModelParams& a, const ModelParams& b, const char* what) {
  if (!same_architecture(a, b)) {
    throw ShapeError(std::string(what) + ": parameter shapes do not match");
  }
}

void Hyper::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be >= 0");
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  return {fedlwf::zeros_like(params), fedlwf::zeros_like(params), 0};
}

ModelParams init_model(std::size_t depth, std::size_t width, std::size_t in_dim,
                       std::size_t n_classes, std::uint64_t seed) {
  if (depth < 2) throw ConfigError("depth must be >= 2, got " + std::to_string(depth));
  if (width < 1) throw ConfigError("width must be >= 1");
  if (in_dim < 1) throw ConfigError("in_dim must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2, got " + std::to_string(n_classes));

  Rng rng(seed);
  ModelParams params;
  params.layers.reserve(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    const std::size_t fan_in = k == 0 ? in_dim : width;
    const std::size_t fan_out = k + 1 == depth ? n_classes : width;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Layer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weights.values()) w = uniform_real(rng, -limit, limit);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void check_batch(const ModelParams& params, const Matrix& batch) {
  params.validate();
  if (batch.cols() != params.in_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, model expects " + std::to_string(params.in_dim()));
  }
}

// z = x * W + b, then ReLU unless this is the output layer.
Matrix apply_layer(const Layer& layer, const Matrix& x, bool relu) {
  Matrix z = matmul(x, layer.weights);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double v = row[c] + layer.bias[c];
      row[c] = relu && v < 0.0 ? 0.0 : v;
    }
  }
  return z;
}

}  // namespace

ForwardTrace forward(const ModelParams& params, const Matrix& batch) {
  check_batch(params, batch);
  ForwardTrace trace;
  trace.inputs.reserve(params.depth());
  trace.inputs.push_back(batch);
  for (std::size_t k = 0; k + 1 < params.depth(); ++k) {
    trace.inputs.push_back(apply_layer(params.layers[k], trace.inputs.back(), true));
  }
  trace.logits = apply_layer(params.layers.back(), trace.inputs.back(), false);
  return trace;
}

Matrix predict_logits(const ModelParams& params, const Matrix& batch) {
  check_batch(params, batch);
  Matrix x = batch;
  for (std::size_t k = 0; k + 1 < params.depth(); ++k) {
    x = apply_layer(params.layers[k], x, true);
  }
  return apply_layer(params.layers.back(), x, false);
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& dlogits,
                     double l2) {
  if (trace.inputs.size() != params.depth() || dlogits.rows() != trace.logits.rows() ||
      dlogits.cols() != trace.logits.cols()) {
    throw ShapeError("backward: trace does not match model or dlogits");
  }
  ModelParams grads;
  grads.layers.resize(params.depth());
  Matrix delta = dlogits;
  for (std::size_t k = params.depth(); k-- > 0;) {
    const Layer& layer = params.layers[k];
    const Matrix& input = trace.inputs[k];
    Layer& g = grads.layers[k];

    g.weights = matmul_tn(input, delta);
    if (l2 != 0.0) {
      auto gw = g.weights.values();
      auto w = layer.weights.values();
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += l2 * w[i];
    }
    g.bias.assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto d = delta.row(r);
      for (std::size_t c = 0; c < d.size(); ++c) g.bias[c] += d[c];
    }

    if (k == 0) break;
    Matrix upstream = matmul_nt(delta, layer.weights);
    // ReLU derivative, read from the post-activation input of this layer.
    auto u = upstream.values();
    auto a = input.values();
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!(a[i] > 0.0)) u[i] = 0.0;
    }
    delta = std::move(upstream);
  }
  return grads;
}

namespace {

void adam_tensor(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, const Hyper& h, double correction1, double correction2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state,
                 const Hyper& hyper) {
  require_same_architecture(params, grads, "adam_step(grads)");
  require_same_architecture(params, state.m, "adam_step(state.m)");
  require_same_architecture(params, state.v, "adam_step(state.v)");

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.depth(); ++k) {
    auto& p = params.layers[k];
    const auto& g = grads.layers[k];
    adam_tensor(p.weights.values(), g.weights.values(), state.m.layers[k].weights.values(),
                state.v.layers[k].weights.values(), hyper, c1, c2);
    adam_tensor(p.bias, g.bias, state.m.layers[k].bias, state.v.layers[k].bias, hyper, c1, c2);
  }
}

AdamResult adam_step(const ModelParams& params, const ModelParams& grads, const AdamState& state,
                     const Hyper& hyper) {
  AdamResult out{params, state};
  adam_update(out.params, grads, out.state, hyper);
  return out;
}

}  // namespace fedlwf
