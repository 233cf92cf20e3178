// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "hsf/classifier.hpp"
#include "hsf/error.hpp"
#include "support/oracles.hpp"

namespace hsf {
namespace {

ClassifierParams linear(std::vector<double> w, double b) {
  ClassifierParams p;
  p.config.architecture = Architecture::Linear;
  p.config.input_dim = w.size();
  p.config.k = 1;
  p.w2 = std::move(w);
  p.b2 = b;
  return p;
}

ClassifierConfig mlp_config(std::size_t in, std::size_t width, std::uint64_t seed) {
  ClassifierConfig c;
  c.architecture = Architecture::Mlp1;
  c.input_dim = in;
  c.hidden_width = width;
  c.seed = seed;
  c.k = 1;
  return c;
}

TEST(InitParams, Deterministic) {
  const auto c = mlp_config(10, 6, 77);
  EXPECT_EQ(init_params(c), init_params(c));
  auto c2 = c;
  c2.seed = 78;
  EXPECT_NE(init_params(c).w1, init_params(c2).w1);
}

TEST(InitParams, LinearShape) {
  ClassifierConfig c;
  c.architecture = Architecture::Linear;
  c.input_dim = 3;
  c.k = 1;
  const auto p = init_params(c);
  EXPECT_EQ(p.w2.size(), 3u);
  EXPECT_EQ(p.b2, 0.0);
  EXPECT_TRUE(p.w1.empty());
}

TEST(InitParams, MlpBound) {
  const auto p = init_params(mlp_config(6, 4, 1));
  ASSERT_EQ(p.w1.size(), 24u);
  const double bound = std::sqrt(6.0 / 10.0);
  for (double v : p.w1) EXPECT_LE(std::abs(v), bound);
  for (double v : p.b1) EXPECT_EQ(v, 0.0);
}

TEST(InitParams, ZeroInputDim) {
  EXPECT_THROW((void)init_params(mlp_config(0, 4, 1)), RangeError);
}

TEST(Forward, LinearByHand) {
  const std::vector<double> x = {2, 1};
  EXPECT_DOUBLE_EQ(forward(linear({1, -2}, 0.5), x), 0.5);
}

TEST(Forward, MlpReluChain) {
  ClassifierParams p;
  p.config = mlp_config(2, 2, 0);
  p.w1 = {1, 0, 0, 1};
  p.b1 = {0, 0};
  p.w2 = {1, 1};
  p.b2 = 0;
  const std::vector<double> x = {-1, 3};
  EXPECT_EQ(forward(p, x), 3.0);
}

TEST(Forward, DropoutOffMatchesEval) {
  auto c = mlp_config(5, 7, 3);
  c.dropout_rate = 0.0;
  const auto p = init_params(c);
  DropoutSource d(0.0, 1);
  const std::vector<double> x = {0.3, -1, 2, 0.5, 4};
  EXPECT_EQ(forward(p, x, d), forward(p, x));
}

TEST(Forward, DimensionMismatch) {
  const std::vector<double> x = {1, 2, 3};
  EXPECT_THROW((void)forward(linear({1, 2}, 0), x), DimensionError);
}

TEST(Dropout, InvertedScaling) {
  DropoutSource d(0.25, 9);
  std::vector<double> mask(100000);
  d.draw(mask);
  double sum = 0.0;
  for (double m : mask) {
    ASSERT_TRUE(m == 0.0 || m == 1.0 / 0.75);
    sum += m;
  }
  EXPECT_NEAR(sum / mask.size(), 1.0, 0.01);
}

TEST(Score, Sigmoid) {
  const std::vector<double> zero = {0.0};
  EXPECT_EQ(score(linear({1}, 0), zero), 0.5);
  const std::vector<double> x = {std::log(3.0)};
  EXPECT_NEAR(score(linear({1}, 0), x), 0.75, 1e-15);
}

TEST(Score, StrictlyIncreasingAndBounded) {
  double prev = 0.0;
  for (double z = -30; z <= 30; z += 0.25) {
    const double s = sigmoid(z);
    EXPECT_GT(s, prev);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    prev = s;
  }
}

TEST(BceLoss, Values) {
  EXPECT_NEAR(bce_loss(0, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(2, 1), std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(bce_loss(2, 1), 0.1269280110429725, 1e-15);
}

TEST(BceLoss, StableForHugeLogits) {
  EXPECT_EQ(bce_loss(1e4, 1), 0.0);
  EXPECT_DOUBLE_EQ(bce_loss(-1e4, 1), 1e4);
  EXPECT_DOUBLE_EQ(bce_loss(1e4, 0), 1e4);
  EXPECT_TRUE(std::isfinite(bce_loss(-1e4, 0)));
}

TEST(BceLoss, MonotoneAndNonNegative) {
  for (double z = -20; z < 20; z += 0.5) {
    EXPECT_GE(bce_loss(z, 1), 0.0);
    EXPECT_GE(bce_loss(z, 0), 0.0);
    EXPECT_GT(bce_loss(z, 1), bce_loss(z + 0.5, 1));
    EXPECT_LT(bce_loss(z, 0), bce_loss(z + 0.5, 0));
  }
}

TEST(Grad, LinearClosedForm) {
  const auto p = linear({0.5, -1.5, 2}, 0.25);
  Matrix x(1, 3);
  x.data = {1, 2, -3};
  const std::vector<int> l = {1};
  const double r = sigmoid(forward(p, x.row(0))) - 1.0;
  const auto g = grad(p, x, l);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.w2[i], r * x.data[i], 1e-15);
  EXPECT_NEAR(g.b2, r, 1e-15);
}

TEST(Grad, DuplicatedRowsLeaveMeanUnchanged) {
  const auto p = init_params(mlp_config(4, 5, 2));
  Matrix x(3, 4);
  CounterRng rng(1, 0);
  for (auto& v : x.data) v = rng.normal();
  const std::vector<int> l = {1, 0, 1};
  Matrix x2(6, 4);
  std::vector<int> l2;
  for (std::size_t r = 0; r < 6; ++r) {
    std::copy(x.row(r % 3).begin(), x.row(r % 3).end(), x2.row(r).begin());
    l2.push_back(l[r % 3]);
  }
  const auto a = oracle::flatten(grad(p, x, l));
  const auto b = oracle::flatten(grad(p, x2, l2));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Grad, MatchesFiniteDifferences) {
  CounterRng rng(21, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = init_params(mlp_config(3 + trial % 5, 2 + trial % 4, trial));
    Matrix x(4, p.config.input_dim);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<int> l = {1, 0, 0, 1};
    const auto analytic = oracle::flatten(grad(p, x, l));
    const auto numeric = oracle::numeric_gradient(p, x, l, 1e-5);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LT(std::abs(analytic[i] - numeric[i]) / scale, 1e-4) << "param " << i;
    }
  }
}

TEST(Grad, DropoutMasksMatchForwardDraws) {
  auto c = mlp_config(4, 6, 5);
  c.dropout_rate = 0.5;
  const auto p = init_params(c);
  Matrix x(1, 4);
  x.data = {1, -2, 0.5, 3};
  const std::vector<int> l = {1};
  DropoutSource a(0.5, 8), b(0.5, 8);
  const double logit = forward(p, x.row(0), a);
  const auto g = grad(p, x, l, &b);
  EXPECT_NEAR(g.loss, bce_loss(logit, 1), 1e-15);
}

DesignMatrix line_data(std::size_t per_class, double offset) {
  DesignMatrix d;
  d.x = Matrix(2 * per_class, 1);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool harmful = i % 2 == 0;
    d.x.data[i] = (harmful ? offset : -offset) + 0.1 * static_cast<double>(i % 5);
    d.labels.push_back(harmful ? 1 : 0);
  }
  return d;
}

TEST(Train, SeparableLine) {
  auto c = mlp_config(1, 8, 4);
  c.epochs = 30;
  c.batch_size = 4;
  const auto r = train(line_data(10, 10.0), line_data(10, 10.0), c);
  ASSERT_EQ(r.history.size(), 30u);
  EXPECT_EQ(r.history.back().val_auc.value(), 1.0);
  EXPECT_EQ(r.history[r.best_epoch].val_auc.value(), 1.0);
}

TEST(Train, Deterministic) {
  auto c = mlp_config(1, 8, 4);
  c.epochs = 5;
  const auto a = train(line_data(10, 1.0), line_data(5, 1.0), c);
  const auto b = train(line_data(10, 1.0), line_data(5, 1.0), c);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Train, GaussianClustersFourSigma) {
  CounterRng rng(12, 0);
  const auto draw = [&](std::size_t n) {
    DesignMatrix d;
    d.x = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const int l = static_cast<int>(i % 2);
      d.x(i, 0) = (l ? 2.0 : -2.0) + rng.normal();
      d.x(i, 1) = rng.normal();
      d.labels.push_back(l);
    }
    return d;
  };
  auto c = mlp_config(2, 16, 6);
  c.epochs = 20;
  const auto r = train(draw(400), draw(400), c);
  EXPECT_GE(r.history[r.best_epoch].val_auc.value(), 0.99);
}

TEST(Train, SingleClassRejected) {
  DesignMatrix d;
  d.x = Matrix(3, 1);
  d.labels = {1, 1, 1};
  EXPECT_THROW((void)train(d, d, mlp_config(1, 2, 0)), InvariantError);
}

TEST(Train, NonFiniteInputReportsNumericError) {
  DesignMatrix d = line_data(4, 1.0);
  d.x.data[0] = std::numeric_limits<double>::infinity();
  try {
    (void)train(d, line_data(2, 1.0), mlp_config(1, 2, 0));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(FilterDecision, Thresholds) {
  const auto p = linear({1}, 0);
  const std::vector<double> high = {std::log(0.7 / 0.3)};
  const std::vector<double> low = {std::log(0.3 / 0.7)};
  const std::vector<double> tie = {0.0};
  EXPECT_EQ(filter_decision(p, high, 0.5).verdict, Verdict::Block);
  EXPECT_EQ(filter_decision(p, low, 0.5).verdict, Verdict::Allow);
  const auto d = filter_decision(p, tie, 0.5);
  EXPECT_EQ(d.score, 0.5);
  EXPECT_EQ(d.verdict, Verdict::Allow);
  EXPECT_EQ(d.threshold, 0.5);
}

TEST(FilterDecision, BlockSetShrinksAsBetaGrows) {
  const auto p = init_params(mlp_config(3, 4, 10));
  CounterRng rng(2, 0);
  std::vector<std::vector<double>> xs(200, std::vector<double>(3));
  for (auto& x : xs) for (auto& v : x) v = 3 * rng.normal();
  for (double b1 = 0.05; b1 < 0.95; b1 += 0.1) {
    const double b2 = b1 + 0.05;
    for (const auto& x : xs) {
      if (filter_decision(p, x, b2).verdict == Verdict::Block) {
        EXPECT_EQ(filter_decision(p, x, b1).verdict, Verdict::Block);
      }
    }
  }
}

TEST(FilterDecision, BetaOutOfRange) {
  const std::vector<double> x = {0.0};
  EXPECT_THROW((void)filter_decision(linear({1}, 0), x, 1.0), RangeError);
  EXPECT_THROW((void)filter_decision(linear({1}, 0), x, 0.0), RangeError);
}

TEST(Params, RoundTripExact) {
  for (auto arch : {Architecture::Linear, Architecture::Mlp1}) {
    auto c = mlp_config(13, 5, 99);
    c.architecture = arch;
    c.k = 7;
    c.dropout_rate = 0.3;
    c.learning_rate = 0.0123;
    const auto p = init_params(c);
    std::stringstream ss;
    save_params(p, ss);
    EXPECT_EQ(load_params(ss), p);
  }
}

TEST(Params, TruncatedAndBadMagic) {
  const auto p = init_params(mlp_config(4, 3, 1));
  std::stringstream ss;
  save_params(p, ss);
  const std::string bytes = ss.str();
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() - 1}) {
    std::istringstream is(bytes.substr(0, cut));
    EXPECT_THROW((void)load_params(is), FormatError) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream is(bad);
  EXPECT_THROW((void)load_params(is), FormatError);
}

TEST(Params, KMismatchIsDimensionError) {
  auto c = mlp_config(feature_length(7, 4), 3, 1);
  c.k = 7;
  const auto p = init_params(c);
  const std::vector<float> tokens(8 * 4, 1.0f);
  const auto f = assemble_feature(tokens, 4, 3);
  EXPECT_THROW((void)score(p, f.values), DimensionError);
}

}  // namespace
}  // namespace hsf
