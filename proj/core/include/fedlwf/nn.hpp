#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedlwf/matrix.hpp"

namespace fedlwf {

/// One affine layer: outputs = inputs * weights + bias.
struct Layer {
  Matrix weights;             // [fan_in x fan_out]
  std::vector<double> bias;   // [fan_out]

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered weight/bias pairs of a ReLU MLP. Gradients and Adam moments
/// share this shape.
struct ModelParams {
  std::vector<Layer> layers;

  [[nodiscard]] std::size_t depth() const noexcept { return layers.size(); }
  [[nodiscard]] std::size_t in_dim() const;
  [[nodiscard]] std::size_t n_classes() const;
  [[nodiscard]] std::size_t parameter_count() const noexcept;

  /// Throws ShapeError when the dimension chain is broken or depth < 2.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Zero-valued params with the same shapes as `like`.
[[nodiscard]] ModelParams zeros_like(const ModelParams& like);
[[nodiscard]] bool same_architecture(const ModelParams& a, const ModelParams& b) noexcept;
[[nodiscard]] bool bitwise_equal(const ModelParams& a, const ModelParams& b) noexcept;
/// Throws ShapeError naming `what` when architectures differ.
void require_same_architecture(const ModelParams& a, const ModelParams& b, const char* what);

struct Hyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-4;  // coefficient of 0.5 * ||weights||^2, biases excluded

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t t = 0;

  [[nodiscard]] static AdamState zeros_like(const ModelParams& params);
};

/// Depth counts every weight layer including the output layer, so
/// depth=3 is in -> width -> width -> classes. He-uniform weights, zero biases.
[[nodiscard]] ModelParams init_model(std::size_t depth, std::size_t width, std::size_t in_dim,
                                     std::size_t n_classes, std::uint64_t seed);

struct ForwardTrace {
  // inputs[k] is the input to layer k; inputs[0] is the batch itself and
  // later entries are post-ReLU hidden activations.
  std::vector<Matrix> inputs;
  Matrix logits;
};

[[nodiscard]] ForwardTrace forward(const ModelParams& params, const Matrix& batch);
/// Logits only; avoids keeping the activation trace.
[[nodiscard]] Matrix predict_logits(const ModelParams& params, const Matrix& batch);

/// Backpropagates dlogits through the trace. Weight gradients include
/// l2 * weights; biases are not regularized.
[[nodiscard]] ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                                   const Matrix& dlogits, double l2);

struct AdamResult {
  ModelParams params;
  AdamState state;
};

/// Bias-corrected Adam. Inputs are not modified.
[[nodiscard]] AdamResult adam_step(const ModelParams& params, const ModelParams& grads,
                                   const AdamState& state, const Hyper& hyper);
/// In-place form used by the training loops; bitwise-identical to adam_step.
void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state,
                 const Hyper& hyper);

}  // namespace fedlwf
