#include "fedlwf/federated.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#include "fedlwf/errors.hpp"
#include "fedlwf/random.hpp"

namespace fedlwf {

namespace {

constexpr std::uint64_t kPartitionKey = 0x70a7'7171'0000'0001ULL;

std::vector<std::vector<std::size_t>> iid_assignment(std::size_t n, std::size_t n_clients,
                                                     std::uint64_t seed) {
  const auto perm = permutation(n, seed);
  std::vector<std::vector<std::size_t>> out(n_clients);
  const std::size_t base = n / n_clients;
  const std::size_t extra = n % n_clients;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < n_clients; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    out[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                  perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

std::vector<std::vector<std::size_t>> label_skew_assignment(const Dataset& data,
                                                            std::size_t n_clients, double alpha,
                                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out(n_clients);
  std::vector<std::vector<std::size_t>> by_label(data.n_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_label[static_cast<std::size_t>(data.labels()[i])].push_back(i);
  }

  std::vector<double> props(n_clients);
  for (auto& rows : by_label) {
    // Shuffle within the label, then cut at the cumulative Dirichlet proportions.
    const auto perm = permutation(rows.size(), rng);
    double total = 0.0;
    for (double& p : props) {
      p = gamma_sample(rng, alpha);
      total += p;
    }
    if (!(total > 0.0)) {
      std::fill(props.begin(), props.end(), 0.0);
      props[uniform_index(rng, n_clients)] = 1.0;
      total = 1.0;
    }
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < n_clients; ++k) {
      cum += props[k] / total;
      std::size_t end = k + 1 == n_clients
                            ? rows.size()
                            : static_cast<std::size_t>(cum * static_cast<double>(rows.size()));
      end = std::clamp(end, start, rows.size());
      for (std::size_t i = start; i < end; ++i) out[k].push_back(rows[perm[i]]);
      start = end;
    }
  }

  // Repair: every client must hold at least one row. Take from the largest
  // shard (lowest id on ties) until no shard is empty.
  for (std::size_t k = 0; k < n_clients; ++k) {
    if (!out[k].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t d = 1; d < n_clients; ++d) {
      if (out[d].size() > out[donor].size()) donor = d;
    }
    out[k].push_back(out[donor].back());
    out[donor].pop_back();
  }
  return out;
}

}  // namespace

std::vector<ClientShard> partition(const Dataset& data, std::size_t n_clients,
                                   PartitionStrategy strategy, std::uint64_t seed) {
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (n_clients > data.size()) {
    throw ConfigError("n_clients (" + std::to_string(n_clients) + ") exceeds dataset size (" +
                      std::to_string(data.size()) + ")");
  }
  std::vector<std::vector<std::size_t>> assignment;
  if (strategy.kind == PartitionKind::iid) {
    assignment = iid_assignment(data.size(), n_clients, seed);
  } else {
    if (!(strategy.alpha > 0.0)) throw ConfigError("label_skew alpha must be > 0");
    assignment = label_skew_assignment(data, n_clients, strategy.alpha, seed);
  }

  std::vector<ClientShard> shards;
  shards.reserve(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) {
    auto& idx = assignment[k];
    std::sort(idx.begin(), idx.end());
    ClientShard shard;
    shard.client_id = k;
    shard.data = data.subset(idx);
    shard.indices = std::move(idx);
    shards.push_back(std::move(shard));
  }
  return shards;
}

void FedConfig::validate() const {
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (partition.kind == PartitionKind::label_skew && !(partition.alpha > 0.0)) {
    throw ConfigError("alpha must be > 0");
  }
  train.validate();
}

std::uint64_t client_seed(std::uint64_t event_seed, std::size_t round_idx,
                          std::size_t client_id) noexcept {
  return mix_seed(event_seed, round_idx, client_id);
}

ClientUpdate local_update(const ModelParams& central, const ClientShard& shard,
                          const TeacherSnapshot* teacher, const FedConfig& cfg,
                          std::size_t round_idx) {
  if (shard.data.size() == 0) {
    throw DataError("client " + std::to_string(shard.client_id) + " has an empty shard");
  }
  TrainConfig local = cfg.train;
  local.epochs = cfg.local_epochs;
  local.seed = client_seed(cfg.train.seed, round_idx, shard.client_id);
  TaskResult trained = train_on_task(central, shard.data, nullptr, teacher, local);
  return {std::move(trained.params), shard.data.size(), shard.client_id};
}

ModelParams aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ProtocolError("aggregate: no client updates");
  std::vector<const ClientUpdate*> order;
  order.reserve(updates.size());
  for (const auto& u : updates) {
    if (u.n_samples == 0) {
      throw ProtocolError("aggregate: client " + std::to_string(u.client_id) + " reported 0 samples");
    }
    require_same_architecture(updates.front().params, u.params, "aggregate");
    order.push_back(&u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  // Running weighted mean: after client k the accumulator equals
  // sum_{i<=k} n_i p_i / sum_{i<=k} n_i. Identical inputs are a fixed point,
  // so averaging copies of one model returns it bit for bit.
  ModelParams mean = order.front()->params;
  std::size_t seen = order.front()->n_samples;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const ClientUpdate& u = *order[k];
    seen += u.n_samples;
    const double w = static_cast<double>(u.n_samples) / static_cast<double>(seen);
    for (std::size_t l = 0; l < mean.depth(); ++l) {
      auto acc_w = mean.layers[l].weights.values();
      auto src_w = u.params.layers[l].weights.values();
      for (std::size_t i = 0; i < acc_w.size(); ++i) acc_w[i] += w * (src_w[i] - acc_w[i]);
      auto& acc_b = mean.layers[l].bias;
      const auto& src_b = u.params.layers[l].bias;
      for (std::size_t i = 0; i < acc_b.size(); ++i) acc_b[i] += w * (src_b[i] - acc_b[i]);
    }
  }
  return mean;
}

namespace {

std::vector<ClientUpdate> train_clients(const ModelParams& central,
                                        const std::vector<ClientShard>& shards,
                                        const TeacherSnapshot* teacher, const FedConfig& cfg,
                                        std::size_t round_idx) {
  std::vector<std::optional<ClientUpdate>> slots(shards.size());
  std::vector<std::exception_ptr> errors(shards.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < shards.size(); k = next++) {
      try {
        slots[k] = local_update(central, shards[k], teacher, cfg, round_idx);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::min(cfg.threads, shards.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<ClientUpdate> updates;
  updates.reserve(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    updates.push_back(std::move(*slots[k]));
  }
  return updates;
}

}  // namespace

EventResult run_event(const ModelParams& central, const EventSplits& event, std::size_t event_idx,
                      const TeacherSnapshot* teacher, const FedConfig& cfg) {
  cfg.validate();
  central.validate();

  EventResult result;
  const auto shards =
      partition(event.train, cfg.n_clients, cfg.partition, mix_seed(cfg.train.seed, kPartitionKey));
  for (const auto& s : shards) {
    const std::size_t n = s.data.size();
    if (n < kRecommendedMinShard || n > kRecommendedMaxShard) {
      result.warnings.push_back("event " + std::to_string(event_idx) + ": client " +
                                std::to_string(s.client_id) + " holds " + std::to_string(n) +
                                " samples, outside the recommended " +
                                std::to_string(kRecommendedMinShard) + "-" +
                                std::to_string(kRecommendedMaxShard));
    }
  }

  result.central = central;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto updates = train_clients(result.central, shards, teacher, cfg, round);
    result.central = aggregate(updates);
    const Evaluation ev = evaluate(result.central, event.valid);
    result.records.push_back({event_idx, round + 1, (round + 1) * cfg.local_epochs, Split::valid,
                              event_idx, ev.loss, ev.accuracy});
  }
  const Evaluation test = evaluate(result.central, event.test);
  result.records.push_back({event_idx, cfg.rounds, cfg.rounds * cfg.local_epochs, Split::test,
                            event_idx, test.loss, test.accuracy});
  return result;
}

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::fed_cl: return "fed_cl";
    case Mode::fed_only: return "fed_only";
    case Mode::central_cl: return "central_cl";
    case Mode::central_only: return "central_only";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "fed_cl") return Mode::fed_cl;
  if (text == "fed_only") return Mode::fed_only;
  if (text == "central_cl") return Mode::central_cl;
  if (text == "central_only") return Mode::central_only;
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected fed_cl, fed_only, central_cl or central_only)");
}

bool is_federated(Mode mode) noexcept { return mode == Mode::fed_cl || mode == Mode::fed_only; }
bool uses_lwf(Mode mode) noexcept { return mode == Mode::fed_cl || mode == Mode::central_cl; }

SequenceResult run_event_sequence(std::span<const EventSplits> events, const ModelSpec& model,
                                  const FedConfig& cfg, Mode mode) {
  if (events.empty()) throw ConfigError("run_event_sequence: no events");
  cfg.validate();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    for (const Dataset* d : {&e.train, &e.valid, &e.test}) {
      if (d->dim() != model.in_dim) {
        throw ConfigError("event " + std::to_string(i) + " (" + e.name + ") has dim " +
                          std::to_string(d->dim()) + ", model.in_dim is " +
                          std::to_string(model.in_dim));
      }
      if (d->n_classes() != model.n_classes) {
        throw ConfigError("event " + std::to_string(i) + " (" + e.name + ") declares " +
                          std::to_string(d->n_classes()) + " classes, model.n_classes is " +
                          std::to_string(model.n_classes));
      }
    }
  }

  SequenceResult out;
  ModelParams central = init_model(model.depth, model.width, model.in_dim, model.n_classes,
                                   cfg.train.seed);
  std::optional<TeacherSnapshot> teacher;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const EventSplits& event = events[i];
    FedConfig event_cfg = cfg;
    event_cfg.train.seed = mix_seed(cfg.train.seed, i);
    event_cfg.train.lwf.enabled = uses_lwf(mode);
    const TeacherSnapshot* t = teacher ? &*teacher : nullptr;

    std::size_t round_col = 0;
    std::size_t epoch_col = 0;
    if (is_federated(mode)) {
      EventResult r = run_event(central, event, i, t, event_cfg);
      central = std::move(r.central);
      out.log.insert(out.log.end(), r.records.begin(), r.records.end());
      out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
      round_col = event_cfg.rounds;
      epoch_col = event_cfg.rounds * event_cfg.local_epochs;
    } else {
      TrainConfig tc = event_cfg.train;
      tc.seed = client_seed(event_cfg.train.seed, 0, 0);
      TaskResult r = train_on_task(std::move(central), event.train, &event.valid, t, tc);
      central = std::move(r.params);
      for (const auto& m : r.epochs) {
        out.log.push_back({i, 0, m.epoch, Split::valid, i, *m.valid_loss, *m.valid_accuracy});
      }
      epoch_col = tc.epochs;
    }

    std::vector<double> test_acc(events.size());
    std::vector<double> test_loss(events.size());
    std::vector<double> train_acc(events.size());
    for (std::size_t j = 0; j < events.size(); ++j) {
      const Evaluation ev = evaluate(central, events[j].test);
      test_acc[j] = ev.accuracy;
      test_loss[j] = ev.loss;
      // run_event already logged the own-event test row.
      if (!(is_federated(mode) && j == i)) {
        out.log.push_back({i, round_col, epoch_col, Split::test, j, ev.loss, ev.accuracy});
      }
    }
    for (std::size_t j = 0; j < events.size(); ++j) {
      const Evaluation ev = evaluate(central, events[j].train);
      train_acc[j] = ev.accuracy;
      out.log.push_back({i, round_col, epoch_col, Split::train, j, ev.loss, ev.accuracy});
    }
    out.test_accuracy.add_row(std::move(test_acc));
    out.test_loss.push_back(std::move(test_loss));
    out.train_accuracy.add_row(std::move(train_acc));

    if (uses_lwf(mode)) teacher = snapshot_teacher(central, i);
  }
  out.final_params = std::move(central);
  return out;
}

}  // namespace fedlwf
