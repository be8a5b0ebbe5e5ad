#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fedlwf/errors.hpp"
#include "fedlwf/federated.hpp"
#include "fedlwf/random.hpp"
#include "oracles.hpp"

namespace fedlwf {
namespace {

Dataset labelled(std::size_t n, std::size_t n_classes, std::uint64_t seed) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % n_classes);
  return Dataset(oracle::random_matrix(n, 4, seed), labels, n_classes);
}

void expect_valid_partition(const std::vector<ClientShard>& shards, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (std::size_t k = 0; k < shards.size(); ++k) {
    EXPECT_EQ(shards[k].client_id, k);
    ASSERT_FALSE(shards[k].indices.empty());
    EXPECT_TRUE(std::is_sorted(shards[k].indices.begin(), shards[k].indices.end()));
    EXPECT_EQ(shards[k].data.size(), shards[k].indices.size());
    for (std::size_t i : shards[k].indices) ++seen.at(i);
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST(PartitionTest, AsManyClientsAsRowsGivesSingletons) {
  const Dataset d = labelled(10, 3, 1);
  const auto shards = partition(d, 10, PartitionStrategy::iid(), 5);
  expect_valid_partition(shards, 10);
  for (const auto& s : shards) EXPECT_EQ(s.data.size(), 1u);
}

TEST(PartitionTest, IidSizesDifferByAtMostOne) {
  const auto shards = partition(labelled(103, 5, 2), 4, PartitionStrategy::iid(), 3);
  expect_valid_partition(shards, 103);
  EXPECT_EQ(shards[0].data.size(), 26u);
  EXPECT_EQ(shards[3].data.size(), 25u);
}

TEST(PartitionTest, ShardRowsMatchParentRows) {
  const Dataset d = labelled(40, 4, 3);
  for (const auto& s : partition(d, 3, PartitionStrategy::label_skew(0.3), 8)) {
    for (std::size_t r = 0; r < s.indices.size(); ++r) {
      EXPECT_EQ(s.data.labels()[r], d.labels()[s.indices[r]]);
      EXPECT_TRUE(bitwise_equal(s.data.features().row(r), d.features().row(s.indices[r])));
    }
  }
}

TEST(PartitionTest, RandomInstancesAreExactCovers) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const std::size_t clients = 1 + rng() % n;
    const std::size_t classes = 1 + rng() % 5;
    const PartitionStrategy s = trial % 2 == 0 ? PartitionStrategy::iid()
                                               : PartitionStrategy::label_skew(0.05 + (rng() % 100) / 10.0);
    const auto shards = partition(labelled(n, classes, trial), clients, s, rng());
    ASSERT_EQ(shards.size(), clients);
    expect_valid_partition(shards, n);
  }
}

TEST(PartitionTest, LowAlphaSkewsLabels) {
  const Dataset d = labelled(1000, 10, 4);
  auto mean_entropy = [&](double alpha) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (const auto& s : partition(d, 5, PartitionStrategy::label_skew(alpha), seed)) {
        total += oracle::label_entropy(s.data);
      }
    }
    return total / 25.0;
  };
  EXPECT_LT(mean_entropy(0.1), mean_entropy(100.0));
  EXPECT_GT(mean_entropy(100.0), 0.9 * std::log(10.0));
}

TEST(PartitionTest, DeterministicGivenSeed) {
  const Dataset d = labelled(50, 5, 5);
  const auto a = partition(d, 4, PartitionStrategy::label_skew(0.5), 9);
  const auto b = partition(d, 4, PartitionStrategy::label_skew(0.5), 9);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(a[k].indices, b[k].indices);
}

TEST(PartitionTest, RejectsBadArguments) {
  const Dataset d = labelled(5, 2, 6);
  EXPECT_THROW((void)partition(d, 6, PartitionStrategy::iid(), 0), ConfigError);
  EXPECT_THROW((void)partition(d, 0, PartitionStrategy::iid(), 0), ConfigError);
  EXPECT_THROW((void)partition(d, 2, PartitionStrategy::label_skew(0.0), 0), ConfigError);
}

FedConfig small_fed() {
  FedConfig cfg;
  cfg.n_clients = 3;
  cfg.rounds = 2;
  cfg.local_epochs = 2;
  cfg.train.batch_size = 16;
  cfg.train.seed = 21;
  return cfg;
}

EventSplits small_event(std::uint64_t seed) {
  oracle::SuiteSpec spec;
  spec.n_events = 1;
  spec.n_classes = 4;
  spec.dim = 8;
  spec.n_per_class = 30;
  spec.seed = seed;
  return oracle::shifted_cluster_suite(spec).front();
}

TEST(LocalUpdateTest, ZeroLearningRateReturnsCentral) {
  const EventSplits e = small_event(1);
  FedConfig cfg = small_fed();
  cfg.train.hyper.lr = 0.0;
  const ModelParams central = init_model(3, 6, 8, 4, 2);
  const auto shards = partition(e.train, 3, cfg.partition, 1);
  EXPECT_TRUE(bitwise_equal(local_update(central, shards[1], nullptr, cfg, 0).params, central));
}

TEST(LocalUpdateTest, IdenticalShardsAndIdsGiveIdenticalUpdates) {
  const EventSplits e = small_event(2);
  const FedConfig cfg = small_fed();
  const ModelParams central = init_model(3, 6, 8, 4, 3);
  ClientShard s{0, {}, e.train};
  const ClientUpdate a = local_update(central, s, nullptr, cfg, 4);
  const ClientUpdate b = local_update(central, s, nullptr, cfg, 4);
  EXPECT_TRUE(bitwise_equal(a.params, b.params));
  EXPECT_EQ(a.n_samples, e.train.size());
}

TEST(LocalUpdateTest, MatchesTrainOnTaskWithClientSeed) {
  const EventSplits e = small_event(3);
  const FedConfig cfg = small_fed();
  const ModelParams central = init_model(3, 6, 8, 4, 4);
  const TeacherSnapshot teacher = snapshot_teacher(init_model(3, 6, 8, 4, 5), 0);
  const ClientShard s{2, {}, e.train};
  TrainConfig tc = cfg.train;
  tc.epochs = cfg.local_epochs;
  tc.seed = client_seed(cfg.train.seed, 1, 2);
  EXPECT_TRUE(bitwise_equal(local_update(central, s, &teacher, cfg, 1).params,
                            train_on_task(central, e.train, nullptr, &teacher, tc).params));
}

ClientUpdate constant_update(const ModelParams& shape, double value, std::size_t n, std::size_t id) {
  ModelParams p = shape;
  for (auto& l : p.layers) {
    std::fill(l.weights.values().begin(), l.weights.values().end(), value);
    std::fill(l.bias.begin(), l.bias.end(), value);
  }
  return {p, n, id};
}

TEST(AggregateTest, EqualWeightsAverage) {
  const ModelParams shape = init_model(2, 3, 2, 2, 0);
  const std::vector<ClientUpdate> u{constant_update(shape, 1.0, 10, 0), constant_update(shape, 3.0, 10, 1)};
  const ModelParams m = aggregate(u);
  for (double v : oracle::flatten(m)) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(AggregateTest, IdenticalUpdatesAreAFixedPoint) {
  const ModelParams p = oracle::random_model({5, 7, 3}, 8);
  const std::vector<ClientUpdate> u{{p, 13, 0}, {p, 7, 1}, {p, 1001, 2}};
  EXPECT_TRUE(bitwise_equal(aggregate(u), p));
}

TEST(AggregateTest, MatchesWeightedMeanOracle) {
  std::vector<ClientUpdate> u;
  std::vector<std::vector<double>> flat;
  const std::vector<std::size_t> n{1, 2, 3};
  for (std::size_t k = 0; k < 3; ++k) {
    u.push_back({oracle::random_model({4, 5, 3}, 100 + k), n[k], k});
    flat.push_back(oracle::flatten(u.back().params));
  }
  const auto got = oracle::flatten(aggregate(u));
  const auto want = oracle::weighted_mean(flat, n);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
}

TEST(AggregateTest, ScalingSampleCountsLeavesResultUnchanged) {
  std::vector<ClientUpdate> u;
  for (std::size_t k = 0; k < 4; ++k) u.push_back({oracle::random_model({3, 4, 2}, 200 + k), 3 + k, k});
  auto scaled = u;
  for (auto& s : scaled) s.n_samples *= 1000;
  // Weights are ratios of exactly representable counts, so scaling is exact.
  EXPECT_TRUE(bitwise_equal(aggregate(u), aggregate(scaled)));
}

TEST(AggregateTest, InputOrderDoesNotMatter) {
  std::vector<ClientUpdate> u;
  for (std::size_t k = 0; k < 5; ++k) u.push_back({oracle::random_model({3, 4, 2}, 300 + k), 10 * (k + 1), k});
  auto shuffled = u;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[1], shuffled[3]);
  const auto a = oracle::flatten(aggregate(u));
  const auto b = oracle::flatten(aggregate(shuffled));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(AggregateTest, RejectsInvalidInput) {
  EXPECT_THROW((void)aggregate({}), ProtocolError);
  const std::vector<ClientUpdate> zero{{oracle::random_model({3, 4, 2}, 1), 0, 0}};
  EXPECT_THROW((void)aggregate(zero), ProtocolError);
  const std::vector<ClientUpdate> mixed{{oracle::random_model({3, 4, 2}, 1), 5, 0},
                                        {oracle::random_model({3, 5, 2}, 2), 5, 1}};
  EXPECT_THROW((void)aggregate(mixed), ShapeError);
}

TEST(RunEventTest, ZeroLearningRateKeepsCentral) {
  const EventSplits e = small_event(4);
  FedConfig cfg = small_fed();
  cfg.train.hyper.lr = 0.0;
  const ModelParams central = init_model(3, 6, 8, 4, 6);
  const EventResult r = run_event(central, e, 0, nullptr, cfg);
  EXPECT_TRUE(bitwise_equal(r.central, central));
}

TEST(RunEventTest, OneValidRowPerRoundThenTest) {
  const EventSplits e = small_event(5);
  FedConfig cfg = small_fed();
  cfg.rounds = 3;
  const EventResult r = run_event(init_model(3, 6, 8, 4, 7), e, 2, nullptr, cfg);
  ASSERT_EQ(r.records.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.records[i].split, Split::valid);
    EXPECT_EQ(r.records[i].round, i + 1);
    EXPECT_EQ(r.records[i].epoch, (i + 1) * cfg.local_epochs);
    EXPECT_EQ(r.records[i].event, 2u);
  }
  EXPECT_EQ(r.records.back().split, Split::test);
  // Tiny shards trip the size advisory but do not stop the run.
  EXPECT_EQ(r.warnings.size(), 3u);
}

TEST(RunEventTest, SingleClientSingleRoundEqualsCentralizedTraining) {
  const EventSplits e = small_event(6);
  FedConfig cfg = small_fed();
  cfg.n_clients = 1;
  cfg.rounds = 1;
  cfg.local_epochs = 4;
  const ModelParams start = init_model(3, 6, 8, 4, 8);
  TrainConfig tc = cfg.train;
  tc.epochs = 4;
  tc.seed = client_seed(cfg.train.seed, 0, 0);
  EXPECT_TRUE(bitwise_equal(run_event(start, e, 0, nullptr, cfg).central,
                            train_on_task(start, e.train, nullptr, nullptr, tc).params));
}

std::vector<EventSplits> small_suite(std::size_t n_events, std::uint64_t seed) {
  oracle::SuiteSpec spec;
  spec.n_events = n_events;
  spec.n_classes = 4;
  spec.dim = 8;
  spec.n_per_class = 30;
  spec.seed = seed;
  return oracle::shifted_cluster_suite(spec);
}

const ModelSpec kSmallModel{3, 6, 8, 4};

TEST(SequenceTest, LogAndMatricesHaveExpectedShape) {
  const auto events = small_suite(3, 1);
  const SequenceResult r = run_event_sequence(events, kSmallModel, small_fed(), Mode::fed_cl);
  const auto n_test = std::count_if(r.log.begin(), r.log.end(), [](const EvalRecord& e) { return e.split == Split::test; });
  const auto n_train = std::count_if(r.log.begin(), r.log.end(), [](const EvalRecord& e) { return e.split == Split::train; });
  const auto n_valid = std::count_if(r.log.begin(), r.log.end(), [](const EvalRecord& e) { return e.split == Split::valid; });
  EXPECT_EQ(n_test, 9);
  EXPECT_EQ(n_train, 9);
  EXPECT_EQ(n_valid, 6);
  EXPECT_EQ(r.test_accuracy.events_completed(), 3u);
  EXPECT_EQ(r.test_loss.size(), 3u);
  EXPECT_EQ(r.train_accuracy.events_completed(), 3u);
}

TEST(SequenceTest, CentralModeLogsOneValidRowPerEpoch) {
  const auto events = small_suite(2, 2);
  FedConfig cfg = small_fed();
  cfg.train.epochs = 3;
  const SequenceResult r = run_event_sequence(events, kSmallModel, cfg, Mode::central_only);
  const auto n_valid = std::count_if(r.log.begin(), r.log.end(), [](const EvalRecord& e) { return e.split == Split::valid; });
  EXPECT_EQ(n_valid, 6);
}

TEST(SequenceTest, SingleEventMakesLwfIrrelevant) {
  const auto events = small_suite(1, 3);
  const FedConfig cfg = small_fed();
  EXPECT_TRUE(bitwise_equal(run_event_sequence(events, kSmallModel, cfg, Mode::fed_cl).final_params,
                            run_event_sequence(events, kSmallModel, cfg, Mode::fed_only).final_params));
  EXPECT_TRUE(bitwise_equal(run_event_sequence(events, kSmallModel, cfg, Mode::central_cl).final_params,
                            run_event_sequence(events, kSmallModel, cfg, Mode::central_only).final_params));
}

TEST(SequenceTest, ZeroLambdaMatchesPlainFederated) {
  const auto events = small_suite(3, 4);
  FedConfig cfg = small_fed();
  cfg.train.lwf.lambda0 = 0.0;
  EXPECT_TRUE(bitwise_equal(run_event_sequence(events, kSmallModel, cfg, Mode::fed_cl).final_params,
                            run_event_sequence(events, kSmallModel, cfg, Mode::fed_only).final_params));
}

TEST(SequenceTest, ThreadCountDoesNotChangeResults) {
  const auto events = small_suite(2, 5);
  FedConfig one = small_fed();
  FedConfig four = one;
  four.threads = 4;
  const SequenceResult a = run_event_sequence(events, kSmallModel, one, Mode::fed_cl);
  const SequenceResult b = run_event_sequence(events, kSmallModel, four, Mode::fed_cl);
  EXPECT_TRUE(bitwise_equal(a.final_params, b.final_params));
  EXPECT_EQ(metrics_to_csv(a.log), metrics_to_csv(b.log));
}

TEST(SequenceTest, RejectsMismatchedData) {
  const auto events = small_suite(1, 6);
  ModelSpec wrong = kSmallModel;
  wrong.in_dim = 9;
  EXPECT_THROW((void)run_event_sequence(events, wrong, small_fed(), Mode::fed_cl), ConfigError);
  wrong = kSmallModel;
  wrong.n_classes = 5;
  EXPECT_THROW((void)run_event_sequence(events, wrong, small_fed(), Mode::fed_cl), ConfigError);
  EXPECT_THROW((void)run_event_sequence({}, kSmallModel, small_fed(), Mode::fed_cl), ConfigError);
}

// Fixed 4,500-sample dataset; more clients means smaller shards and a
// blurrier average, so accuracy should not improve as clients are added.
TEST(SequenceTest, AccuracyDoesNotRiseWithClientCount) {
  oracle::SuiteSpec spec;
  spec.n_events = 1;
  spec.n_per_class = 450;
  double previous = 1.0;
  for (std::size_t n : {3u, 5u, 7u, 9u}) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      spec.seed = seed;
      FedConfig cfg;
      cfg.n_clients = n;
      cfg.rounds = 4;
      cfg.local_epochs = 5;
      cfg.train.seed = seed;
      const auto r = run_event_sequence(oracle::shifted_cluster_suite(spec), ModelSpec{3, 32, 32, 10}, cfg,
                                        Mode::fed_cl);
      mean += r.test_accuracy.at(0, 0) / 5.0;
    }
    EXPECT_LE(mean, previous) << "n_clients=" << n;
    previous = mean;
  }
}

TEST(ModeTest, ParseRoundTrips) {
  for (Mode m : {Mode::fed_cl, Mode::fed_only, Mode::central_cl, Mode::central_only}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  EXPECT_THROW((void)parse_mode("federated"), ConfigError);
}

}  // namespace
}  // namespace fedlwf
