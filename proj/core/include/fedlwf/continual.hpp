#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "fedlwf/data_io.hpp"
#include "fedlwf/losses.hpp"
#include "fedlwf/nn.hpp"

namespace fedlwf {

/// Frozen copy of the central model taken after an event. It is the only
/// memory of earlier tasks.
class TeacherSnapshot {
 public:
  TeacherSnapshot(const ModelParams& params, std::size_t taken_after_event);

  [[nodiscard]] const ModelParams& params() const noexcept { return *params_; }
  [[nodiscard]] std::size_t taken_after_event() const noexcept { return taken_after_event_; }

 private:
  std::shared_ptr<const ModelParams> params_;
  std::size_t taken_after_event_;
};

[[nodiscard]] TeacherSnapshot snapshot_teacher(const ModelParams& params, std::size_t event_idx);

struct SoftLabels {
  Matrix probs;  // [N x C], temperature-softened teacher probabilities
};

[[nodiscard]] SoftLabels record_soft_labels(const TeacherSnapshot& teacher, const Matrix& data,
                                            double temperature);

/// Soft cross-entropy of softmax(student_logits / T) against `targets`.
[[nodiscard]] LossGrad distillation_loss(const Matrix& student_logits, const Matrix& targets,
                                         double temperature);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  Hyper hyper;
  LwfConfig lwf;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;      // 1-based
  double train_loss = 0.0;    // sample-weighted mean of the batch objectives
  double train_accuracy = 0.0;
  std::optional<double> valid_loss;
  std::optional<double> valid_accuracy;
};

struct TaskResult {
  ModelParams params;
  std::vector<EpochMetrics> epochs;
};

/// Trains `params` on one task with the regularized objective. Soft targets
/// are recorded from `teacher` once before the first epoch; Adam state starts
/// fresh. `valid` and `teacher` are optional.
[[nodiscard]] TaskResult train_on_task(ModelParams params, const Dataset& train,
                                       const Dataset* valid, const TeacherSnapshot* teacher,
                                       const TrainConfig& cfg);

}  // namespace fedlwf
