#include "ramp/tinynet.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ramp;
using namespace ramp::tinynet;
using ramp::testing::random_vector;

namespace {

MlpParams affine(double w, double b) {
  MlpParams p = init_mlp({1, 1}, Activation::relu, 0);
  p.weights[0](0, 0) = w;
  p.biases[0](0) = b;
  return p;
}

// Central differences of the scalar loss g . f(x) w.r.t. every parameter and input.
void finite_difference_check(MlpParams p, const Vector& x, const Vector& g) {
  const MlpGradients grads = backward(p, x, g);
  const double h = 1e-5;
  auto loss = [&](const MlpParams& q, const Vector& in) { return g.dot(forward(q, in)); };
  double worst = 0.0;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
      const double orig = p.weights[l].data()[i];
      p.weights[l].data()[i] = orig + h;
      const double up = loss(p, x);
      p.weights[l].data()[i] = orig - h;
      const double down = loss(p, x);
      p.weights[l].data()[i] = orig;
      worst = std::max(worst, ramp::testing::rel_err(grads.weights[l].data()[i], (up - down) / (2 * h), 1e-4));
    }
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
      const double orig = p.biases[l](i);
      p.biases[l](i) = orig + h;
      const double up = loss(p, x);
      p.biases[l](i) = orig - h;
      const double down = loss(p, x);
      p.biases[l](i) = orig;
      worst = std::max(worst, ramp::testing::rel_err(grads.biases[l](i), (up - down) / (2 * h), 1e-4));
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    worst = std::max(worst, ramp::testing::rel_err(grads.input(i, 0), (loss(p, xp) - loss(p, xm)) / (2 * h), 1e-4));
  }
  EXPECT_LT(worst, 1e-4);
}

}  // namespace

TEST(TinynetInit, BiasesStartAtZero) {
  const auto p = init_mlp({2, 1}, Activation::relu, 42);
  ASSERT_EQ(p.biases.size(), 1u);
  EXPECT_EQ(p.biases[0](0), 0.0);
}

TEST(TinynetInit, SameSeedIsBitwiseIdentical) {
  EXPECT_TRUE(init_mlp({3, 32, 32, 1}, Activation::relu, 7) == init_mlp({3, 32, 32, 1}, Activation::relu, 7));
  EXPECT_FALSE(init_mlp({3, 32, 32, 1}, Activation::relu, 7) == init_mlp({3, 32, 32, 1}, Activation::relu, 8));
}

TEST(TinynetInit, FanInScaleWithinTwentyPercent) {
  const std::vector<int> sizes{3, 32, 32, 1};
  for (std::size_t layer = 0; layer < 3; ++layer) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = init_mlp(sizes, Activation::relu, seed);
      const Matrix& w = p.weights[layer];
      sum += w.sum();
      sq += w.squaredNorm();
      n += static_cast<double>(w.size());
    }
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    const double expected = std::sqrt(2.0 / sizes[layer]);
    EXPECT_NEAR(sd / expected, 1.0, 0.2) << "layer " << layer;
  }
  const auto t = init_mlp({50, 400}, Activation::tanh, 3);
  const double sd = std::sqrt(t.weights[0].squaredNorm() / static_cast<double>(t.weights[0].size()));
  EXPECT_NEAR(sd / std::sqrt(1.0 / 50), 1.0, 0.05);
}

TEST(TinynetInit, RejectsBadSizes) {
  EXPECT_THROW(init_mlp({}, Activation::relu, 0), InvalidArgument);
  EXPECT_THROW(init_mlp({3}, Activation::relu, 0), InvalidArgument);
  EXPECT_THROW(init_mlp({3, 0, 1}, Activation::relu, 0), InvalidArgument);
  EXPECT_THROW(init_mlp({-1, 2}, Activation::relu, 0), InvalidArgument);
}

TEST(TinynetForward, AffineLayer) {
  const Vector out = forward(affine(2.0, 1.0), Vector::Constant(1, 3.0));
  ASSERT_EQ(out.size(), 1);
  EXPECT_EQ(out(0), 7.0);
}

TEST(TinynetForward, ZeroNetGivesZero) {
  auto p = init_mlp({4, 6, 3}, Activation::tanh, 1);
  for (auto& w : p.weights) w.setZero();
  for (auto& b : p.biases) b.setZero();
  Rng rng(5);
  EXPECT_EQ(forward(p, random_vector(4, rng)), Vector::Zero(3));
}

TEST(TinynetForward, HandComposedTanhNet) {
  MlpParams p = init_mlp({2, 2, 1}, Activation::tanh, 0);
  p.weights[0] << 0.5, -1.0, 2.0, 0.25;
  p.biases[0] << 0.1, -0.2;
  p.weights[1] << 1.5, -0.5;
  p.biases[1] << 0.3;
  const double x0 = 0.4, x1 = -0.8;
  const double h0 = std::tanh(0.5 * x0 - 1.0 * x1 + 0.1);
  const double h1 = std::tanh(2.0 * x0 + 0.25 * x1 - 0.2);
  const double expected = 1.5 * h0 - 0.5 * h1 + 0.3;
  Vector x(2);
  x << x0, x1;
  EXPECT_NEAR(forward(p, x)(0), expected, 1e-15);
}

TEST(TinynetForward, DimensionMismatchThrows) {
  const auto p = init_mlp({3, 4, 2}, Activation::relu, 0);
  EXPECT_THROW(forward(p, Vector::Zero(2)), InvalidArgument);
  EXPECT_THROW(forward_batch(p, Matrix::Zero(4, 5)), InvalidArgument);
}

TEST(TinynetForward, BatchMatchesSingle) {
  const auto p = init_mlp({3, 16, 2}, Activation::relu, 9);
  Rng rng(2);
  const Matrix x = ramp::testing::random_matrix(3, 7, rng);
  const Matrix y = forward_batch(p, x);
  for (int c = 0; c < 7; ++c) EXPECT_LT((y.col(c) - forward(p, x.col(c))).norm(), 1e-14);
}

TEST(TinynetBackward, AffineChainRule) {
  const auto g = backward(affine(2.0, 1.0), Vector::Constant(1, 1.0), Vector::Constant(1, 6.0));
  EXPECT_EQ(g.weights[0](0, 0), 6.0);
  EXPECT_EQ(g.biases[0](0), 6.0);
  EXPECT_EQ(g.input(0, 0), 12.0);
}

TEST(TinynetBackward, ZeroOutputGradientGivesZeroGradients) {
  const auto p = init_mlp({4, 8, 3}, Activation::relu, 4);
  Rng rng(1);
  const auto g = backward(p, random_vector(4, rng), Vector::Zero(3));
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    EXPECT_EQ(g.weights[l].squaredNorm(), 0.0);
    EXPECT_EQ(g.biases[l].squaredNorm(), 0.0);
  }
}

TEST(TinynetBackward, FiniteDifferences_4_8_3) {
  for (auto act : {Activation::tanh, Activation::relu}) {
    auto p = init_mlp({4, 8, 3}, act, 11);
    Rng rng(3);
    for (auto& b : p.biases) b = random_vector(b.size(), rng, 0.5);
    finite_difference_check(p, random_vector(4, rng), random_vector(3, rng));
  }
}

TEST(TinynetBackward, FiniteDifferencesTwentyRandomNets) {
  Rng rng(123);
  std::uniform_int_distribution<int> width(1, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<int> sizes{width(rng), width(rng), width(rng), width(rng)};
    auto p = init_mlp(sizes, trial % 2 ? Activation::relu : Activation::tanh, static_cast<std::uint64_t>(trial));
    for (auto& b : p.biases) b = random_vector(b.size(), rng, 0.5);
    finite_difference_check(p, random_vector(sizes.front(), rng), random_vector(sizes.back(), rng));
  }
}

TEST(TinynetBackward, BatchGradientIsSumOfSingles) {
  const auto p = init_mlp({3, 5, 2}, Activation::tanh, 6);
  Rng rng(8);
  const Matrix x = ramp::testing::random_matrix(3, 4, rng);
  const Matrix g = ramp::testing::random_matrix(2, 4, rng);
  const auto batch = backward_cached(p, forward_cached(p, x), g);
  MlpGradients sum = MlpGradients::zeros_like(p);
  for (int c = 0; c < 4; ++c) {
    const auto one = backward(p, x.col(c), g.col(c));
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      sum.weights[l] += one.weights[l];
      sum.biases[l] += one.biases[l];
    }
  }
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    EXPECT_LT((batch.weights[l] - sum.weights[l]).norm(), 1e-12);
    EXPECT_LT((batch.biases[l] - sum.biases[l]).norm(), 1e-12);
  }
}

TEST(TinynetAdam, ZeroGradientLeavesParams) {
  auto p = init_mlp({3, 4, 2}, Activation::relu, 1);
  const auto before = p;
  auto s = AdamState::for_params(p, 1e-2);
  adam_step(p, MlpGradients::zeros_like(p), s);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(s.step_count, 1);
}

TEST(TinynetAdam, FirstStepMovesByLearningRate) {
  auto p = affine(1.0, 0.0);
  auto s = AdamState::for_params(p, 1e-3);
  auto g = MlpGradients::zeros_like(p);
  const double grad = 0.37;
  g.weights[0](0, 0) = grad;
  adam_step(p, g, s);
  // m_hat = g, v_hat = g^2 after bias correction.
  EXPECT_NEAR(p.weights[0](0, 0) - 1.0, -1e-3 * grad / (std::abs(grad) + 1e-8), 1e-15);
}

TEST(TinynetAdam, QuadraticConverges) {
  auto p = affine(0.0, 0.0);
  auto s = AdamState::for_params(p, 1e-2);
  for (int i = 0; i < 2000; ++i) {
    auto g = MlpGradients::zeros_like(p);
    g.weights[0](0, 0) = 2.0 * (p.weights[0](0, 0) - 5.0);
    adam_step(p, g, s);
  }
  EXPECT_LT(std::abs(p.weights[0](0, 0) - 5.0), 1e-2);
}

TEST(TinynetAdam, NonFiniteGradientThrowsAndLeavesParams) {
  auto p = init_mlp({2, 3, 1}, Activation::relu, 2);
  const auto before = p;
  auto s = AdamState::for_params(p, 1e-2);
  auto g = MlpGradients::zeros_like(p);
  g.biases[1](0) = std::nan("");
  EXPECT_THROW(adam_step(p, g, s), NumericFailure);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(s.step_count, 0);
}

TEST(TinynetAdam, HiddenPermutationIsEquivariant) {
  auto p = init_mlp({3, 4, 2}, Activation::tanh, 10);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  auto q = p;
  q.weights[0] = perm * p.weights[0];
  q.biases[0] = perm * p.biases[0];
  q.weights[1] = p.weights[1] * perm.transpose();
  auto sp = AdamState::for_params(p, 1e-2), sq = AdamState::for_params(q, 1e-2);
  Rng rng(4);
  for (int step = 0; step < 25; ++step) {
    const Vector x = random_vector(3, rng);
    const Vector target = random_vector(2, rng);
    adam_step(p, backward(p, x, 2.0 * (forward(p, x) - target)), sp);
    adam_step(q, backward(q, x, 2.0 * (forward(q, x) - target)), sq);
  }
  EXPECT_LT((q.weights[0] - perm * p.weights[0]).norm(), 1e-12);
  EXPECT_LT((q.weights[1] - p.weights[1] * perm.transpose()).norm(), 1e-12);
}

TEST(TinynetFlatten, RoundTripAndLayout) {
  const auto p = init_mlp({2, 3, 1}, Activation::tanh, 5);
  const auto flat = flatten(p);
  ASSERT_EQ(flat.size(), p.parameter_count());
  EXPECT_EQ(flat[0], p.weights[0](0, 0));
  EXPECT_EQ(flat[1], p.weights[0](0, 1));
  EXPECT_EQ(flat[6], p.biases[0](0));
  EXPECT_EQ(flat[9], p.weights[1](0, 0));
  EXPECT_TRUE(unflatten(p.layer_sizes, p.activation, flat) == p);
  EXPECT_THROW(unflatten(p.layer_sizes, p.activation, std::span<const double>(flat.data(), flat.size() - 1)),
               InvalidArgument);
}
