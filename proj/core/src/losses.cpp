#include "fedlwf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedlwf/errors.hpp"

namespace fedlwf {

namespace {

// log(sum(exp(u))) for u = row / temperature, max-shifted.
double log_sum_exp(std::span<const double> row, double inv_t) {
  double mx = -INFINITY;
  for (double z : row) mx = std::max(mx, z * inv_t);
  double sum = 0.0;
  for (double z : row) sum += std::exp(z * inv_t - mx);
  return mx + std::log(sum);
}

}  // namespace

LossGrad softmax_xent(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  }
  const std::size_t n_classes = logits.cols();
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  LossGrad out{0.0, Matrix(logits.rows(), n_classes)};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw DataError("label " + std::to_string(label) + " at row " + std::to_string(r) +
                      " outside [0, " + std::to_string(n_classes) + ")");
    }
    const auto z = logits.row(r);
    const double lse = log_sum_exp(z, 1.0);
    out.loss += lse - z[static_cast<std::size_t>(label)];
    auto d = out.dlogits.row(r);
    for (std::size_t c = 0; c < n_classes; ++c) d[c] = std::exp(z[c] - lse) * inv_b;
    d[static_cast<std::size_t>(label)] -= inv_b;
  }
  out.loss *= inv_b;
  return out;
}

LossGrad soft_xent(const Matrix& logits, const Matrix& targets, double temperature) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("soft targets are " + std::to_string(targets.rows()) + "x" +
                     std::to_string(targets.cols()) + ", logits are " +
                     std::to_string(logits.rows()) + "x" + std::to_string(logits.cols()));
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  const double inv_t = 1.0 / temperature;
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  LossGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    const auto t = targets.row(r);
    const double lse = log_sum_exp(z, inv_t);
    double mass = 0.0;
    double row_loss = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      mass += t[c];
      if (t[c] != 0.0) row_loss -= t[c] * (z[c] * inv_t - lse);
    }
    out.loss += row_loss;
    auto d = out.dlogits.row(r);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double p = std::exp(z[c] * inv_t - lse);
      d[c] = (p * mass - t[c]) * inv_t * inv_b;
    }
  }
  out.loss *= inv_b;
  return out;
}

void LwfConfig::validate() const {
  if (!(lambda0 >= 0.0)) throw ConfigError("lambda0 must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
}

LossAndGrads loss_and_grads(const ModelParams& params, const Matrix& batch,
                            std::span<const int> labels, const Matrix* soft_targets,
                            const LwfConfig& lwf, const Hyper& hyper) {
  ForwardTrace trace = forward(params, batch);
  LossGrad ce = softmax_xent(trace.logits, labels);

  if (soft_targets != nullptr) {
    if (soft_targets->rows() != trace.logits.rows() ||
        soft_targets->cols() != trace.logits.cols()) {
      throw ShapeError("soft targets are " + std::to_string(soft_targets->rows()) + "x" +
                       std::to_string(soft_targets->cols()) + ", logits are " +
                       std::to_string(trace.logits.rows()) + "x" +
                       std::to_string(trace.logits.cols()));
    }
    for (std::size_t r = 0; r < soft_targets->rows(); ++r) {
      double sum = 0.0;
      for (double p : soft_targets->row(r)) sum += p;
      if (std::abs(sum - 1.0) > 1e-6) {
        throw DataError("soft target row " + std::to_string(r) + " sums to " +
                        std::to_string(sum));
      }
    }
  }

  double loss = ce.loss;
  Matrix dlogits = std::move(ce.dlogits);
  if (soft_targets != nullptr && lwf.enabled && lwf.lambda0 != 0.0) {
    const LossGrad old_task = soft_xent(trace.logits, *soft_targets, lwf.temperature);
    loss += lwf.lambda0 * old_task.loss;
    auto d = dlogits.values();
    auto o = old_task.dlogits.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += lwf.lambda0 * o[i];
  }
  if (hyper.l2 != 0.0) {
    double sq = 0.0;
    for (const auto& layer : params.layers) {
      for (double w : layer.weights.values()) sq += w * w;
    }
    loss += hyper.l2 * 0.5 * sq;
  }

  LossAndGrads out;
  out.loss = loss;
  out.grads = backward(params, trace, dlogits, hyper.l2);
  out.logits = std::move(trace.logits);
  return out;
}

}  // namespace fedlwf
