#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fedlwf/errors.hpp"
#include "fedlwf/nn.hpp"
#include "oracles.hpp"

namespace fedlwf {
namespace {

TEST(InitModelTest, TenLayerChainAndParameterCount) {
  const ModelParams p = init_model(10, 100, 512, 10, 7);
  ASSERT_EQ(p.depth(), 10u);
  EXPECT_EQ(p.layers.front().weights.rows(), 512u);
  EXPECT_EQ(p.layers.front().weights.cols(), 100u);
  for (std::size_t k = 1; k + 1 < p.depth(); ++k) {
    EXPECT_EQ(p.layers[k].weights.rows(), 100u);
    EXPECT_EQ(p.layers[k].weights.cols(), 100u);
  }
  EXPECT_EQ(p.layers.back().weights.cols(), 10u);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.parameter_count(), 512u * 100 + 100 + 8 * (100 * 100 + 100) + 100 * 10 + 10);
}

TEST(InitModelTest, BiasesZeroWeightsWithinHeUniformLimit) {
  const ModelParams tiny = init_model(2, 1, 1, 2, 0);
  for (const auto& l : tiny.layers)
    for (double b : l.bias) EXPECT_EQ(b, 0.0);

  const ModelParams p = init_model(3, 20, 16, 4, 3);
  for (const auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weights.rows()));
    for (double w : l.weights.values()) {
      EXPECT_LE(std::abs(w), limit);
    }
  }
}

TEST(InitModelTest, SameSeedBitIdenticalDifferentSeedDiffers) {
  EXPECT_TRUE(bitwise_equal(init_model(4, 8, 5, 3, 42), init_model(4, 8, 5, 3, 42)));
  EXPECT_FALSE(bitwise_equal(init_model(4, 8, 5, 3, 42), init_model(4, 8, 5, 3, 43)));
}

TEST(InitModelTest, InvalidDimensionsNameTheField) {
  try {
    (void)init_model(1, 8, 5, 3, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("depth"), std::string::npos);
  }
  EXPECT_THROW((void)init_model(3, 0, 5, 3, 0), ConfigError);
  EXPECT_THROW((void)init_model(3, 8, 0, 3, 0), ConfigError);
  EXPECT_THROW((void)init_model(3, 8, 5, 1, 0), ConfigError);
}

TEST(ForwardTest, ZeroBatchZeroBiasGivesZeroLogits) {
  const ModelParams p = init_model(3, 6, 4, 5, 1);
  const ForwardTrace t = forward(p, Matrix(3, 4, 0.0));
  for (double z : t.logits.values()) EXPECT_EQ(z, 0.0);
}

TEST(ForwardTest, SingleRowMatchesRowInsideLargerBatch) {
  const ModelParams p = init_model(3, 16, 8, 10, 2);
  const Matrix batch = oracle::random_matrix(32, 8, 4);
  const Matrix all = forward(p, batch).logits;
  const std::vector<std::size_t> pick{17};
  const Matrix one = forward(p, gather_rows(batch, pick)).logits;
  EXPECT_TRUE(bitwise_equal(one.row(0), all.row(17)));
}

TEST(ForwardTest, MatchesNaiveMatmulOracle) {
  const ModelParams p = oracle::random_model({7, 5, 6, 4}, 11);
  const Matrix batch = oracle::random_matrix(9, 7, 12);
  const Matrix logits = forward(p, batch).logits;
  const auto ref = oracle::forward(p, batch);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(logits(r, c), ref[r][c], 1e-12);
  EXPECT_TRUE(bitwise_equal(predict_logits(p, batch), logits));
}

TEST(ForwardTest, PermutingRowsPermutesLogits) {
  const ModelParams p = init_model(3, 12, 6, 4, 8);
  const Matrix batch = oracle::random_matrix(10, 6, 9);
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0u);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 3, perm.end());
  const Matrix base = forward(p, batch).logits;
  const Matrix permuted = forward(p, gather_rows(batch, perm)).logits;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_TRUE(bitwise_equal(permuted.row(i), base.row(perm[i])));
  }
}

TEST(ForwardTest, DimensionMismatchIsShapeError) {
  const ModelParams p = init_model(2, 4, 5, 3, 0);
  EXPECT_THROW((void)forward(p, Matrix(2, 4)), ShapeError);
}

TEST(AdamTest, ZeroGradientLeavesParamsBitIdentical) {
  const ModelParams p = init_model(3, 5, 4, 3, 1);
  const AdamResult r = adam_step(p, zeros_like(p), AdamState::zeros_like(p), Hyper{});
  EXPECT_TRUE(bitwise_equal(r.params, p));
  EXPECT_EQ(r.state.t, 1u);
}

ModelParams scalar_params(double value) {
  ModelParams p;
  p.layers.push_back({Matrix(1, 1, value), {0.0}});
  return p;
}

TEST(AdamTest, FirstStepOnUnitGradient) {
  // t=1: m_hat = g, v_hat = g^2, so the step is lr * 1 / (1 + eps).
  const ModelParams p = scalar_params(0.5);
  ModelParams g = scalar_params(1.0);
  Hyper h;
  const AdamResult r = adam_step(p, g, AdamState::zeros_like(p), h);
  const double step = 0.5 - r.params.layers[0].weights(0, 0);
  EXPECT_NEAR(step, 0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(step, 0.000999999990, 1e-12);
}

TEST(AdamTest, TwoStepsMatchScalarOracle) {
  Hyper h;
  const ModelParams p = scalar_params(0.25);
  const ModelParams g = scalar_params(0.7);
  AdamResult r = adam_step(p, g, AdamState::zeros_like(p), h);
  r = adam_step(r.params, g, r.state, h);
  const double expected = oracle::scalar_adam(0.25, {0.7, 0.7}, h.lr, h.beta1, h.beta2, h.eps);
  EXPECT_NEAR(r.params.layers[0].weights(0, 0), expected, 1e-15);
  EXPECT_EQ(r.state.t, 2u);
}

TEST(AdamTest, PureAndInPlaceAgreeAndInputsUntouched) {
  const ModelParams p = init_model(3, 6, 4, 3, 5);
  ModelParams g = oracle::random_model({4, 6, 6, 3}, 6);
  const AdamState s = AdamState::zeros_like(p);
  const ModelParams p_copy = p;
  const AdamResult pure = adam_step(p, g, s, Hyper{});
  EXPECT_TRUE(bitwise_equal(p, p_copy));
  EXPECT_EQ(s.t, 0u);

  ModelParams q = p;
  AdamState st = s;
  adam_update(q, g, st, Hyper{});
  EXPECT_TRUE(bitwise_equal(q, pure.params));
  EXPECT_TRUE(bitwise_equal(st.m, pure.state.m));
  EXPECT_TRUE(bitwise_equal(st.v, pure.state.v));

  const AdamResult again = adam_step(p, g, s, Hyper{});
  EXPECT_TRUE(bitwise_equal(again.params, pure.params));
}

TEST(AdamTest, ShapeMismatchIsShapeError) {
  const ModelParams p = init_model(3, 6, 4, 3, 5);
  const ModelParams other = init_model(3, 5, 4, 3, 5);
  EXPECT_THROW((void)adam_step(p, other, AdamState::zeros_like(p), Hyper{}), ShapeError);
}

TEST(HyperTest, ValidateRejectsOutOfRange) {
  Hyper h;
  EXPECT_NO_THROW(h.validate());
  h.beta1 = 1.0;
  EXPECT_THROW(h.validate(), ConfigError);
  h = Hyper{};
  h.eps = 0.0;
  EXPECT_THROW(h.validate(), ConfigError);
  h = Hyper{};
  h.l2 = -1.0;
  EXPECT_THROW(h.validate(), ConfigError);
}

}  // namespace
}  // namespace fedlwf
