#include <gtest/gtest.h>

#include <cmath>

#include "tagopt/net.hpp"
#include "test_util.hpp"

namespace tagopt {
namespace {

using testing_util::random_batch;

double rel_sup_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max({den, std::abs(a[i]), std::abs(b[i])});
  }
  return den == 0.0 ? num : num / den;
}

TEST(Net, ParamLayoutAndInitRange) {
  const NetShape shape{4, {5, 3}, 2, 3};
  const MultiHeadNet net(shape, 0.0, 1);
  EXPECT_EQ(net.param_count(), (5 * 4 + 5) + (3 * 5 + 3) + 3 * (2 * 3 + 2));
  const double lim = std::sqrt(6.0 / (4 + 5));
  const auto& l0 = net.trunk()[0];
  for (std::size_t i = 0; i < l0.out * l0.in; ++i) {
    EXPECT_LE(std::abs(net.params()[l0.weight_offset + i]), lim);
  }
  for (std::size_t i = 0; i < l0.out; ++i) EXPECT_EQ(net.params()[l0.bias_offset + i], 0.0);
  EXPECT_EQ(MultiHeadNet(shape, 0.0, 1).params()[0], net.params()[0]);
  EXPECT_NE(MultiHeadNet(shape, 0.0, 2).params()[0], net.params()[0]);
}

TEST(Net, ZeroWeightsGiveZeroLogits) {
  MultiHeadNet net({3, {4}, 2, 2}, 0.0, 1);
  std::vector<double> zeros(net.param_count(), 0.0);
  net.set_params(zeros);
  Rng rng(1);
  const auto b = random_batch(net.shape(), 5, 1, rng);
  const auto logits = net.forward(b.features, 1);
  for (double v : logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(Net, DropoutOffMakesTrainModeIrrelevant) {
  const MultiHeadNet net({3, {8}, 2, 1}, 0.0, 4);
  Rng rng(2), drop(3);
  const auto b = random_batch(net.shape(), 6, 0, rng);
  EXPECT_EQ(net.forward(b.features, 0, &drop), net.forward(b.features, 0));
}

TEST(Net, DropoutChangesTrainPassOnly) {
  const MultiHeadNet net({3, {50}, 2, 1}, 0.5, 4);
  Rng rng(2), drop(3);
  const auto b = random_batch(net.shape(), 6, 0, rng);
  EXPECT_NE(net.forward(b.features, 0, &drop), net.forward(b.features, 0));
  EXPECT_EQ(net.forward(b.features, 0), net.forward(b.features, 0));
}

// 2-2-2 net with hand-set weights, evaluated by hand.
TEST(Net, HandSetTwoTwoTwo) {
  MultiHeadNet net({2, {2}, 2, 1}, 0.0, 0);
  std::vector<double> p(net.param_count());
  const auto& l = net.trunk()[0];
  const auto& h = net.head(0);
  // hidden: W = [[1, -1], [2, 0.5]], b = [0.5, -3]
  p[l.weight_offset + 0] = 1.0;
  p[l.weight_offset + 1] = -1.0;
  p[l.weight_offset + 2] = 2.0;
  p[l.weight_offset + 3] = 0.5;
  p[l.bias_offset + 0] = 0.5;
  p[l.bias_offset + 1] = -3.0;
  // head: W = [[2, 1], [-1, 3]], b = [0.1, 0.2]
  p[h.weight_offset + 0] = 2.0;
  p[h.weight_offset + 1] = 1.0;
  p[h.weight_offset + 2] = -1.0;
  p[h.weight_offset + 3] = 3.0;
  p[h.bias_offset + 0] = 0.1;
  p[h.bias_offset + 1] = 0.2;
  net.set_params(p);
  // x = [1, 0]: z = [1.5, -1] -> relu [1.5, 0] -> logits [3.1, -1.3]
  const auto logits = net.forward(Matrix(1, 2, {1.0, 0.0}), 0);
  EXPECT_DOUBLE_EQ(logits(0, 0), 3.1);
  EXPECT_DOUBLE_EQ(logits(0, 1), -1.3);
}

TEST(Net, UniformLogitsGiveLogC) {
  MultiHeadNet net({3, {4}, 5, 1}, 0.0, 1);
  std::vector<double> zeros(net.param_count(), 0.0);
  net.set_params(zeros);
  Rng rng(1);
  auto b = random_batch(net.shape(), 7, 0, rng);
  EXPECT_NEAR(net.loss(b), std::log(5.0), 1e-14);
  EXPECT_NEAR(net.loss_and_grad(b).loss, std::log(5.0), 1e-14);
}

TEST(Net, OtherHeadsGetZeroGradient) {
  const MultiHeadNet net({4, {6}, 3, 3}, 0.0, 2);
  Rng rng(9);
  const auto b = random_batch(net.shape(), 8, 0, rng);
  const auto g = net.loss_and_grad(b).grad;
  for (std::size_t t : {1, 2}) {
    const auto& h = net.head(t);
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(g[h.weight_offset + i], 0.0);
  }
  double own = 0.0;
  const auto& h0 = net.head(0);
  for (std::size_t i = 0; i < h0.out * h0.in; ++i) own += std::abs(g[h0.weight_offset + i]);
  EXPECT_GT(own, 0.0);
}

TEST(Net, GradientMatchesFiniteDifferences) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(2, 5), width(2, 6), depth(0, 2);
    NetShape shape{dim(rng), {}, dim(rng), 2};
    for (std::size_t l = depth(rng); l > 0; --l) shape.hidden.push_back(width(rng));
    // Random biases too: zero biases put dead-unit preactivations exactly on the ReLU kink.
    MultiHeadNet net(shape, 0.0, rng());
    net.set_params(testing_util::random_vector(net.param_count(), rng, 0.5));
    const auto b = random_batch(shape, 1 + trial % 6, trial % 2, rng);
    const auto analytic = net.loss_and_grad(b).grad;
    const auto numeric = finite_diff_grad(net, b, 1e-5);
    EXPECT_LT(rel_sup_error(analytic, numeric), 1e-5) << "trial " << trial;
  }
}

TEST(Net, FiniteDiffExactOnQuadraticRegime) {
  // Linear net, one example: the loss is smooth and the difference quotient is tight.
  const MultiHeadNet net({3, {}, 2, 1}, 0.0, 5);
  Rng rng(6);
  const auto b = random_batch(net.shape(), 1, 0, rng);
  const auto analytic = net.loss_and_grad(b).grad;
  const auto numeric = finite_diff_grad(net, b, 1e-5);
  EXPECT_LT(testing_util::max_abs_diff(analytic, numeric), 1e-8);
}

TEST(Net, SymmetricPointHasZeroGradient) {
  MultiHeadNet net({2, {3}, 2, 1}, 0.0, 5);
  std::vector<double> zeros(net.param_count(), 0.0);
  net.set_params(zeros);
  TaskBatch b{Matrix(2, 2, {1.0, -2.0, 1.0, -2.0}), 0, {0, 1}};
  const auto numeric = finite_diff_grad(net, b, 1e-5);
  for (double g : numeric) EXPECT_NEAR(g, 0.0, 1e-10);
  for (double g : net.loss_and_grad(b).grad) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Net, MixedBatchesWeightBySize) {
  const MultiHeadNet net({3, {4}, 2, 2}, 0.0, 8);
  Rng rng(1);
  const std::vector<TaskBatch> parts{random_batch(net.shape(), 3, 0, rng),
                                     random_batch(net.shape(), 1, 1, rng)};
  const auto mixed = mixed_loss_and_grad(net, parts);
  const auto a = net.loss_and_grad(parts[0]);
  const auto b = net.loss_and_grad(parts[1]);
  EXPECT_NEAR(mixed.loss, 0.75 * a.loss + 0.25 * b.loss, 1e-14);
  for (std::size_t i = 0; i < mixed.grad.size(); ++i) {
    EXPECT_NEAR(mixed.grad[i], 0.75 * a.grad[i] + 0.25 * b.grad[i], 1e-14);
  }
}

TEST(Net, InputErrors) {
  const MultiHeadNet net({3, {4}, 2, 2}, 0.0, 8);
  EXPECT_THROW((void)net.forward(Matrix(1, 4), 0), ShapeError);
  EXPECT_THROW((void)net.forward(Matrix(1, 3), 2), StateError);
  TaskBatch bad{Matrix(1, 3), 0, {2}};
  EXPECT_THROW((void)net.loss(bad), DomainError);
  EXPECT_THROW(MultiHeadNet({3, {4}, 2, 1}, 1.0, 0), ConfigError);
  EXPECT_THROW((void)finite_diff_grad(net, TaskBatch{Matrix(1, 3), 0, {0}}, 0.0), DomainError);
}

}  // namespace
}  // namespace tagopt
