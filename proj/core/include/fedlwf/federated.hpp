#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedlwf/continual.hpp"
#include "fedlwf/data_io.hpp"
#include "fedlwf/metrics.hpp"
#include "fedlwf/nn.hpp"

namespace fedlwf {

enum class PartitionKind { iid, label_skew };

struct PartitionStrategy {
  PartitionKind kind = PartitionKind::iid;
  double alpha = 0.5;  // Dirichlet concentration, label_skew only

  [[nodiscard]] static PartitionStrategy iid() { return {}; }
  [[nodiscard]] static PartitionStrategy label_skew(double alpha) {
    return {PartitionKind::label_skew, alpha};
  }
};

struct ClientShard {
  std::size_t client_id = 0;
  std::vector<std::size_t> indices;  // ascending rows of the parent dataset
  Dataset data;
};

/// Splits `data` across clients. Shards are disjoint, non-empty, cover every
/// row exactly once, and keep parent row order.
///   iid:        seeded shuffle, then near-equal contiguous splits
///   label_skew: per-label Dirichlet(alpha) proportions over clients, followed
///               by a repair pass that refills empty shards from the largest
[[nodiscard]] std::vector<ClientShard> partition(const Dataset& data, std::size_t n_clients,
                                                 PartitionStrategy strategy, std::uint64_t seed);

// Clients below this size get a warning; the range mirrors the per-volunteer
// corpus sizes the method targets.
inline constexpr std::size_t kRecommendedMinShard = 500;
inline constexpr std::size_t kRecommendedMaxShard = 1500;

struct FedConfig {
  std::size_t n_clients = 3;
  std::size_t rounds = 100;
  std::size_t local_epochs = 5;
  PartitionStrategy partition;
  TrainConfig train;
  std::size_t threads = 1;  // parallel local updates; results do not depend on it

  void validate() const;
};

/// Seed for a client's local training in a round:
/// mix_seed(event_seed, round_idx, client_id). Centralized training uses
/// client_seed(event_seed, 0, 0), which makes it the one-client, one-round
/// special case of federated training.
[[nodiscard]] std::uint64_t client_seed(std::uint64_t event_seed, std::size_t round_idx,
                                        std::size_t client_id) noexcept;

struct ClientUpdate {
  ModelParams params;
  std::size_t n_samples = 0;
  std::size_t client_id = 0;
};

/// Copies `central` and trains it for cfg.local_epochs on the shard, seeded
/// with client_seed(cfg.train.seed, round_idx, shard.client_id).
[[nodiscard]] ClientUpdate local_update(const ModelParams& central, const ClientShard& shard,
                                        const TeacherSnapshot* teacher, const FedConfig& cfg,
                                        std::size_t round_idx);

/// Sample-weighted mean of client params, summed in ascending client_id order.
/// Throws ProtocolError on an empty list, ShapeError on mismatched models.
[[nodiscard]] ModelParams aggregate(std::span<const ClientUpdate> updates);

struct EventResult {
  ModelParams central;
  MetricsLog records;  // one valid row per round, then one test row
  std::vector<std::string> warnings;
};

/// FedAvg over one event: partition once, then per round broadcast, train
/// locally, aggregate and validate; finally test. cfg.train.seed is used as
/// the event seed.
[[nodiscard]] EventResult run_event(const ModelParams& central, const EventSplits& event,
                                    std::size_t event_idx, const TeacherSnapshot* teacher,
                                    const FedConfig& cfg);

enum class Mode { fed_cl, fed_only, central_cl, central_only };

[[nodiscard]] std::string_view to_string(Mode mode) noexcept;
[[nodiscard]] Mode parse_mode(std::string_view text);
[[nodiscard]] bool is_federated(Mode mode) noexcept;
[[nodiscard]] bool uses_lwf(Mode mode) noexcept;

struct ModelSpec {
  std::size_t depth = 3;
  std::size_t width = 100;
  std::size_t in_dim = 512;
  std::size_t n_classes = 10;
};

struct SequenceResult {
  ModelParams final_params;
  MetricsLog log;
  AccuracyMatrix test_accuracy;   // row i: after event i, on every event's test split
  std::vector<std::vector<double>> test_loss;
  AccuracyMatrix train_accuracy;  // row i: after event i, on every event's train split
  std::vector<std::string> warnings;
};

/// Trains one model across `events` in order. The model is initialized with
/// cfg.train.seed; event i trains with seed mix_seed(cfg.train.seed, i).
/// Centralized modes train with cfg.train.epochs per event; federated modes
/// use rounds x local_epochs. *_cl modes snapshot a teacher after each event.
[[nodiscard]] SequenceResult run_event_sequence(std::span<const EventSplits> events,
                                                const ModelSpec& model, const FedConfig& cfg,
                                                Mode mode);

}  // namespace fedlwf
