#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

using namespace ramp;
using namespace ramp::rewardfit;
using ramp::testing::random_matrix;
using ramp::testing::random_vector;

namespace {

features::CumulantDataset synthetic(const Matrix& inputs, const Matrix& targets, int H) {
  features::CumulantDataset d;
  d.horizon = H;
  d.gamma = 0.9;
  d.state_dim = 2;
  d.action_dim = 2;
  d.inputs = inputs;
  d.targets = targets;
  return d;
}

qbasis::QBasisEnsemble small_ensemble(int K, int H, int E, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix x = random_matrix(2 + 2 * H, 40, rng);
  qbasis::QBasisConfig cfg;
  cfg.hidden = {16, 16};
  cfg.ensemble_size = E;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return qbasis::train_qbasis(synthetic(x, random_matrix(K, 40, rng), H), cfg);
}

}  // namespace

TEST(RidgeFit, IdentityClosedForm) {
  const Matrix phi = Matrix::Identity(2, 2);
  Vector r(2);
  r << 2, 4;
  const auto fit = ridge_fit(phi, r, 0.5);
  EXPECT_NEAR(fit.w(0), 1.0, 1e-14);
  EXPECT_NEAR(fit.w(1), 2.0, 1e-14);
  EXPECT_EQ(fit.n_samples_seen, 2);
}

TEST(RidgeFit, HeavyRegularizationShrinks) {
  Rng rng(0);
  const Matrix phi = random_matrix(30, 5, rng);
  const Vector r = random_vector(30, rng);
  EXPECT_LT(ridge_fit(phi, r, 1e6).w.norm(), 1e-4 * r.norm());
}

TEST(RidgeFit, ExactRecoveryWithoutRegularization) {
  Rng rng(1);
  const Matrix phi = append_bias(Matrix(random_matrix(50, 6, rng)));
  const Vector w_true = random_vector(7, rng);
  const auto fit = ridge_fit(phi, phi * w_true, 0.0);
  EXPECT_LT((fit.w - w_true).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(RidgeFit, NormalEquationResidual) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix phi = random_matrix(80, 12, rng, 3.0);
    const Vector r = random_vector(80, rng, 5.0);
    const double lambda = 1.0 / std::sqrt(80.0);
    const auto fit = ridge_fit(phi, r, lambda);
    EXPECT_LT(normal_equation_residual(phi, r, lambda, fit.w), 1e-8 * ((phi.transpose() * r).norm() + 1.0));
  }
}

TEST(RidgeFit, Errors) {
  Matrix phi = Matrix::Zero(4, 3);
  phi.col(0).setOnes();
  phi.col(1).setOnes();
  phi(0, 2) = 1;
  try {
    ridge_fit(phi, Vector::Ones(4), 0.0);
    FAIL() << "expected rank deficiency";
  } catch (const RankDeficiency& e) {
    EXPECT_NE(std::string(e.what()).find("rank deficiency 1"), std::string::npos) << e.what();
  }
  Vector r = Vector::Ones(4);
  r(2) = std::nan("");
  EXPECT_THROW(ridge_fit(Matrix::Identity(4, 4), r, 0.1), InvalidArgument);
  EXPECT_THROW(ridge_fit(Matrix::Identity(4, 4), Vector::Ones(3), 0.1), InvalidArgument);
  EXPECT_THROW(ridge_fit(Matrix::Identity(4, 4), Vector::Ones(4), -1.0), InvalidArgument);
}

TEST(Rls, ZeroUpdatesAndOneStep) {
  auto s = rls_init(1, 1.0);
  EXPECT_EQ(s.w, Vector::Zero(2));
  Vector e1(2);
  e1 << 1, 0;
  rls_update(s, e1, 1.0);
  EXPECT_NEAR(s.w(0), 0.5, 1e-15);
  EXPECT_EQ(s.w(1), 0.0);
  EXPECT_THROW(rls_update(s, Vector::Ones(3), 1.0), InvalidArgument);
  EXPECT_THROW(rls_update(s, e1, std::nan("")), InvalidArgument);
}

TEST(Rls, EveryPrefixMatchesBatchRidge) {
  Rng rng(3);
  const int K = 9, n = 500;
  const Matrix phi = append_bias(Matrix(random_matrix(n, K, rng)));
  const Vector w_true = random_vector(K + 1, rng);
  Vector r = phi * w_true + 0.1 * random_vector(n, rng);
  const double lambda = 0.3;
  auto s = rls_init(K, lambda);
  for (int i = 0; i < n; ++i) {
    rls_update(s, phi.row(i).transpose(), r(i));
    if ((i + 1) % 25 == 0 || i < 5) {
      const auto batch = ridge_fit(phi.topRows(i + 1), r.head(i + 1), lambda / (i + 1));
      EXPECT_LE((s.w - batch.w).norm(), 1e-8 * (1.0 + batch.w.norm())) << "prefix " << i + 1;
      EXPECT_NEAR(s.equivalent_ridge_lambda(), lambda / (i + 1), 1e-15);
    }
  }
  EXPECT_LT((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(s.P).eigenvalues().minCoeff(), 0.0);
}

TEST(Rls, FromBatchEqualsSequential) {
  Rng rng(4);
  const Matrix phi = append_bias(Matrix(random_matrix(120, 6, rng)));
  const Vector r = random_vector(120, rng);
  auto seq = rls_init(6, 2.0);
  for (int i = 0; i < 120; ++i) rls_update(seq, phi.row(i).transpose(), r(i));
  const auto batch = rls_from_batch(phi, r, 2.0);
  EXPECT_LE((seq.w - batch.w).norm(), 1e-10 * (1.0 + batch.w.norm()));
  EXPECT_LT((seq.P - batch.P).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(batch.n, 120);
  // continuing from the batch state stays on the same path
  const Vector extra = append_bias(Vector(random_vector(6, rng)));
  rls_update(seq, extra, 0.7);
  auto cont = batch;
  rls_update(cont, extra, 0.7);
  EXPECT_LE((seq.w - cont.w).norm(), 1e-10 * (1.0 + seq.w.norm()));
}

TEST(QEstimate, BiasOnlyIsConstantCumulant) {
  auto ens = small_ensemble(4, 3, 2, 5);
  ens.gamma = 0.5;
  Vector w = Vector::Zero(5);
  w(4) = 1.0;
  Rng rng(5);
  for (int i = 0; i < 5; ++i)
    EXPECT_NEAR(q_estimate(ens, w, random_vector(2, rng), random_matrix(3, 2, rng)), 1.75, 1e-12);
  EXPECT_THROW(q_estimate(ens, w, random_vector(2, rng), random_matrix(2, 2, rng)), InvalidArgument);
}

TEST(QEstimate, UnitWeightIsMemberMean) {
  const auto ens = small_ensemble(4, 2, 3, 6);
  Rng rng(6);
  const Vector s = random_vector(2, rng);
  const Matrix seq = random_matrix(2, 2, rng);
  const Matrix psi = qbasis::predict_psi(ens, s, seq);
  for (int k = 0; k < 4; ++k) {
    Vector w = Vector::Zero(5);
    w(k) = 1.0;
    EXPECT_NEAR(q_estimate(ens, w, s, seq), psi.col(k).mean(), 1e-10);
  }
}

TEST(QEstimate, LinearInWeights) {
  const auto ens = small_ensemble(6, 2, 3, 7);
  Rng rng(7);
  const Matrix windows = random_matrix(6, 30, rng);
  const Vector w1 = random_vector(7, rng), w2 = random_vector(7, rng);
  const double a = 0.3, b = -2.1;
  const Vector lhs = q_estimate_batch(ens, a * w1 + b * w2, windows);
  const Vector rhs = a * q_estimate_batch(ens, w1, windows) + b * q_estimate_batch(ens, w2, windows);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
}

TEST(QEstimate, RewardShiftMovesOnlyTheBias) {
  const auto ens = small_ensemble(5, 2, 2, 8);
  Rng rng(8);
  const Matrix phi = append_bias(Matrix(random_matrix(60, 5, rng)));
  const Vector r = random_vector(60, rng);
  const double c = 3.25;
  const auto base = ridge_fit(phi, r, 0.0);
  const auto shifted = ridge_fit(phi, (r.array() + c).matrix(), 0.0);
  EXPECT_LT((base.features() - shifted.features()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(shifted.bias() - base.bias(), c, 1e-8);
  const Matrix windows = random_matrix(6, 20, rng);
  const Vector dq = q_estimate_batch(ens, shifted.w, windows) - q_estimate_batch(ens, base.w, windows);
  EXPECT_LT((dq.array() - c * geometric_sum(ens.gamma, ens.horizon)).abs().maxCoeff(), 1e-8);
}

TEST(QEstimate, ExactBasisMatchesMonteCarlo) {
  const int K = 6, H = 4;
  const double gamma = 0.9;
  const auto env = envs::Env::make("point2");
  const auto fm = features::make_feature_map(features::FeatureKind::gaussian_linear, K, 2, 2, 11);
  const auto ens = ramp::testing::exact_point_ensemble(fm, H, gamma);
  Rng rng(12);
  const Vector w = random_vector(K + 1, rng);
  std::uniform_real_distribution<double> start(-4.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector s(2);
    s << start(rng), start(rng);
    Matrix seq(H, 2);
    for (int h = 0; h < H; ++h) seq.row(h) = env.random_action(rng).transpose();
    double mc = 0.0;
    Vector x = s;
    for (int h = 0; h < H; ++h) {
      const Vector a = seq.row(h).transpose();
      mc += std::pow(gamma, h) * w.dot(append_bias(fm.phi(x, a)));
      x = env.step(x, a);
    }
    EXPECT_NEAR(q_estimate(ens, w, s, seq), mc, 0.01 * std::max(1.0, std::abs(mc)));
  }
}
