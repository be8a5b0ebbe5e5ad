#pragma once

#include <span>

#include "fedlwf/matrix.hpp"
#include "fedlwf/nn.hpp"

namespace fedlwf {

struct LossGrad {
  double loss = 0.0;
  Matrix dlogits;
};

/// Mean categorical cross-entropy of softmax(logits) against integer labels.
/// dlogits = (softmax - onehot) / B. Throws DataError on an out-of-range label.
[[nodiscard]] LossGrad softmax_xent(const Matrix& logits, std::span<const int> labels);

/// Mean soft cross-entropy  -sum_c target_c * log softmax(logits / T)_c.
/// The gradient carries the 1/T chain factor.
[[nodiscard]] LossGrad soft_xent(const Matrix& logits, const Matrix& targets, double temperature);

/// Learning-without-Forgetting weighting of the old-task term.
struct LwfConfig {
  double lambda0 = 1.0;
  double temperature = 2.0;
  bool enabled = true;

  void validate() const;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
  Matrix logits;  // kept so callers can score the batch without a second pass
};

/// Total objective  L_new + lambda0 * L_old + l2 * 0.5 * ||W||^2  and its exact
/// gradient. L_old is only present when `soft_targets` is non-null, lwf is
/// enabled and lambda0 != 0; otherwise the result is bitwise the plain
/// cross-entropy path.
[[nodiscard]] LossAndGrads loss_and_grads(const ModelParams& params, const Matrix& batch,
                                          std::span<const int> labels, const Matrix* soft_targets,
                                          const LwfConfig& lwf, const Hyper& hyper);

}  // namespace fedlwf
