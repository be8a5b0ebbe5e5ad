#include "fedlwf/continual.hpp"

#include <cmath>
#include <string>

#include "fedlwf/errors.hpp"
#include "fedlwf/metrics.hpp"

namespace fedlwf {

TeacherSnapshot::TeacherSnapshot(const ModelParams& params, std::size_t taken_after_event)
    : params_(std::make_shared<const ModelParams>(params)),
      taken_after_event_(taken_after_event) {}

TeacherSnapshot snapshot_teacher(const ModelParams& params, std::size_t event_idx) {
  params.validate();
  return TeacherSnapshot(params, event_idx);
}

SoftLabels record_soft_labels(const TeacherSnapshot& teacher, const Matrix& data,
                              double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  return {softmax_rows(predict_logits(teacher.params(), data), temperature)};
}

LossGrad distillation_loss(const Matrix& student_logits, const Matrix& targets,
                           double temperature) {
  return soft_xent(student_logits, targets, temperature);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  hyper.validate();
  lwf.validate();
}

TaskResult train_on_task(ModelParams params, const Dataset& train, const Dataset* valid,
                         const TeacherSnapshot* teacher, const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  if (train.size() == 0) throw DataError("train_on_task: empty training set");
  if (train.dim() != params.in_dim()) {
    throw ShapeError("train_on_task: data dim " + std::to_string(train.dim()) +
                     " does not match model input " + std::to_string(params.in_dim()));
  }

  const bool distill = teacher != nullptr && cfg.lwf.enabled && cfg.lwf.lambda0 != 0.0;
  SoftLabels soft;
  if (distill) {
    require_same_architecture(teacher->params(), params, "train_on_task(teacher)");
    soft = record_soft_labels(*teacher, train.features(), cfg.lwf.temperature);
  }

  TaskResult result;
  result.epochs.reserve(cfg.epochs);
  AdamState state = AdamState::zeros_like(params);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const Batch& batch : batch_iter(train, cfg.batch_size, epoch, cfg.seed)) {
      Matrix targets;
      if (distill) targets = gather_rows(soft.probs, batch.indices);
      LossAndGrads step = loss_and_grads(params, batch.features, batch.labels,
                                         distill ? &targets : nullptr, cfg.lwf, cfg.hyper);
      if (!std::isfinite(step.loss)) {
        throw Error("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      adam_update(params, step.grads, state, cfg.hyper);

      loss_sum += step.loss * static_cast<double>(batch.labels.size());
      for (std::size_t r = 0; r < batch.labels.size(); ++r) {
        if (argmax(step.logits.row(r)) == static_cast<std::size_t>(batch.labels[r])) ++correct;
      }
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(train.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    if (valid != nullptr) {
      const Evaluation ev = evaluate(params, *valid);
      m.valid_loss = ev.loss;
      m.valid_accuracy = ev.accuracy;
    }
    result.epochs.push_back(m);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace fedlwf
