#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/oracle.hpp"
#include "ramp/planner.hpp"
#include "ramp/rewardfit.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ramp;
using namespace ramp::planner;
using ramp::testing::random_matrix;
using ramp::testing::random_vector;

namespace {

qbasis::QBasisEnsemble trained_ensemble(int K, int H, int E, std::uint64_t seed) {
  Rng rng(seed);
  features::CumulantDataset d;
  d.horizon = H;
  d.gamma = 0.9;
  d.state_dim = 2;
  d.action_dim = 2;
  d.inputs = random_matrix(2 + 2 * H, 40, rng);
  d.targets = random_matrix(K, 40, rng);
  qbasis::QBasisConfig cfg;
  cfg.hidden = {16, 16};
  cfg.ensemble_size = E;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return qbasis::train_qbasis(d, cfg);
}

Vector row(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(ScoreCandidates, IdenticalMembersHaveNoPenalty) {
  auto ens = trained_ensemble(5, 3, 1, 0);
  ens.members.push_back(ens.members[0]);
  ens.members.push_back(ens.members[0]);
  Rng rng(0);
  const Vector w = random_vector(6, rng);
  const Matrix cands = random_matrix(6, 20, rng);
  const auto sc = score_candidates(ens, w, random_vector(2, rng), cands, 1.0);
  EXPECT_LT(sc.variance.cwiseAbs().maxCoeff(), 1e-20);
  EXPECT_EQ(sc.score, sc.mean);
}

TEST(ScoreCandidates, PopulationVariancePenalty) {
  Matrix q(2, 2);
  q << 1, 2, 3, 2;
  const auto sc = penalized_scores(q, 1.0);
  EXPECT_EQ(sc.mean, row({2, 2}));
  EXPECT_EQ(sc.variance, row({1, 0}));
  EXPECT_EQ(sc.score, row({1, 2}));
  EXPECT_EQ(argmax_first(sc.score), 1);
  // beta = 0 is the plain ensemble mean
  EXPECT_EQ(penalized_scores(q, 0.0).score, sc.mean);
}

TEST(ScoreCandidates, ZeroTailLeavesScoresUnchanged) {
  const auto ens = trained_ensemble(4, 2, 3, 1);
  auto tail = make_value_tail(2, 2, 2, 0.9, {8}, 0.995, 1e-3, 3);
  tail.online.weights.back().setZero();
  tail.online.biases.back().setZero();
  Rng rng(1);
  const Vector w = random_vector(5, rng), s = random_vector(2, rng);
  const Matrix cands = random_matrix(4, 15, rng);
  EXPECT_EQ(score_candidates(ens, w, s, cands, 0.5, &tail).score, score_candidates(ens, w, s, cands, 0.5).score);
}

TEST(ScoreCandidates, TailAddsDiscountedValue) {
  const auto ens = trained_ensemble(4, 2, 2, 2);
  const auto tail = make_value_tail(2, 2, 2, 0.9, {8}, 0.995, 1e-3, 4);
  Rng rng(2);
  const Vector w = random_vector(5, rng), s = random_vector(2, rng);
  const Matrix cands = random_matrix(4, 10, rng);
  const Vector diff = score_candidates(ens, w, s, cands, 0.5, &tail).score - score_candidates(ens, w, s, cands, 0.5).score;
  const Vector f = tail.evaluate(window_batch(s, cands));
  EXPECT_LT((diff - 0.81 * f).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScoreCandidates, Errors) {
  const auto ens = trained_ensemble(4, 2, 2, 3);
  Rng rng(3);
  const Vector w = random_vector(5, rng), s = random_vector(2, rng);
  EXPECT_THROW(score_candidates(ens, w, s, Matrix(4, 0), 1.0), InvalidArgument);
  EXPECT_THROW(score_candidates(ens, w, s, random_matrix(6, 3, rng), 1.0), InvalidArgument);
  EXPECT_THROW(score_candidates(ens, Vector::Zero(4), s, random_matrix(4, 3, rng), 1.0), InvalidArgument);
}

TEST(ScoreCandidates, ConstantShiftKeepsArgmax) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = random_matrix(4, 30, rng);
    const double beta = std::abs(random_vector(1, rng)(0));
    const auto base = penalized_scores(q, beta);
    const auto shifted = penalized_scores((q.array() + 7.5).matrix(), beta);
    EXPECT_EQ(argmax_first(base.score), argmax_first(shifted.score));
    EXPECT_LT(((shifted.score - base.score).array() - 7.5).abs().maxCoeff(), 1e-12);
  }
}

TEST(RandomShooting, InjectedCandidatesPickBest) {
  Rng rng(5);
  const Matrix cands = random_matrix(4, 2, rng);
  CandidateScores sc;
  sc.score = row({1.0, 2.0});
  sc.mean = sc.score;
  sc.variance = Vector::Zero(2);
  const auto r = select_candidate(cands, sc, 2, 1.0);
  EXPECT_EQ(r.chosen_index, 1);
  EXPECT_EQ(Vector(r.first_action), Vector(cands.col(1).head(2)));
  sc.score = row({3.0, 3.0});
  EXPECT_EQ(select_candidate(cands, sc, 2, 1.0).chosen_index, 0);
}

TEST(RandomShooting, MinimumNormFirstAction) {
  const auto env = envs::Env::make("point2");
  PlannerConfig cfg;
  cfg.num_candidates = 200;
  cfg.horizon = 3;
  const Scorer neg_norm = [](const Matrix& c) {
    CandidateScores sc;
    sc.score = -c.topRows(2).colwise().squaredNorm().transpose();
    sc.mean = sc.score;
    sc.variance = Vector::Zero(c.cols());
    return sc;
  };
  Rng rng(6), replay(6);
  const auto r = random_shooting(neg_norm, env.spec(), cfg, rng);
  const Matrix cands = sample_uniform_candidates(env.spec(), 3, 200, replay);
  EXPECT_DOUBLE_EQ(r.first_action.squaredNorm(), cands.topRows(2).colwise().squaredNorm().minCoeff());
  for (Eigen::Index i = 0; i < cands.size(); ++i) {
    EXPECT_GE(cands.data()[i], -1.0);
    EXPECT_LE(cands.data()[i], 1.0);
  }
}

TEST(RandomShooting, DeterministicAndValidated) {
  const auto env = envs::Env::make("point2");
  const auto ens = trained_ensemble(4, 3, 2, 7);
  Rng wr(7);
  const Vector w = random_vector(5, wr), s = random_vector(2, wr);
  PlannerConfig cfg;
  cfg.num_candidates = 64;
  cfg.horizon = 3;
  Rng a(1), b(1);
  const auto p1 = random_shooting(ens, w, s, env.spec(), cfg, a);
  const auto p2 = random_shooting(ens, w, s, env.spec(), cfg, b);
  EXPECT_EQ(p1.sequence, p2.sequence);
  EXPECT_EQ(p1.chosen_index, p2.chosen_index);
  cfg.num_candidates = 0;
  EXPECT_THROW(random_shooting(ens, w, s, env.spec(), cfg, a), InvalidArgument);
  cfg.num_candidates = 8;
  cfg.horizon = 2;
  EXPECT_THROW(random_shooting(ens, w, s, env.spec(), cfg, a), InvalidArgument);
}

TEST(Mppi, EqualScoresAverage) {
  Matrix samples(3, 2);
  samples << 1, 3, -1, 1, 0.5, 0.5;
  EXPECT_EQ(mppi_weights(row({2.0, 2.0}), 10.0), row({0.5, 0.5}));
  const auto g = mppi_refit(samples, row({2.0, 2.0}), 10.0);
  EXPECT_EQ(g.mean, row({2.0, 0.0, 0.5}));
}

TEST(Mppi, LargeTemperatureSelectsBest) {
  Rng rng(8);
  const Matrix samples = random_matrix(6, 12, rng);
  const Vector scores = random_vector(12, rng);
  Eigen::Index best;
  scores.maxCoeff(&best);
  const auto g = mppi_refit(samples, scores, 1e6);
  EXPECT_LT((g.mean - samples.col(best)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Mppi, ShiftInvariantSimplexWeights) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector s = random_vector(50, rng, 3.0);
    const Vector u = mppi_weights(s, 10.0);
    EXPECT_GE(u.minCoeff(), 0.0);
    EXPECT_NEAR(u.sum(), 1.0, 1e-12);
    EXPECT_LT((mppi_weights((s.array() + 123.0).matrix(), 10.0) - u).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mppi, NonFiniteScoreNamesCandidate) {
  try {
    mppi_weights(row({0.0, std::nan(""), 1.0}), 10.0);
    FAIL() << "expected numeric failure";
  } catch (const NumericFailure& e) {
    EXPECT_NE(std::string(e.what()).find("candidate 1"), std::string::npos) << e.what();
  }
}

TEST(Mppi, PlanStaysInBoundsAndImproves) {
  const auto env = envs::Env::make("point2");
  PlannerConfig cfg;
  cfg.method = Method::mppi;
  cfg.horizon = 2;
  cfg.mppi_samples = 128;
  cfg.mppi_iterations = 4;
  const Vector target = row({0.6, -0.4});
  const Scorer scorer = [&](const Matrix& c) {
    CandidateScores sc;
    sc.score = -(c.topRows(2).colwise() - target).colwise().squaredNorm().transpose();
    sc.mean = sc.score;
    sc.variance = Vector::Zero(c.cols());
    return sc;
  };
  Rng rng(10);
  const auto r = mppi_plan(scorer, env.spec(), cfg, rng);
  EXPECT_LT((r.first_action - target).norm(), 0.1);
  EXPECT_LE(r.sequence.cwiseAbs().maxCoeff(), 1.0);
  cfg.method = Method::random_shooting;
  EXPECT_THROW(mppi_plan(scorer, env.spec(), cfg, rng), InvalidArgument);
}

namespace {

// States 0..4 advance deterministically (4 absorbs); the reward is earned for the state occupied.
std::vector<envs::Trajectory> chain_trajectories(const std::vector<double>& r, int count, int length, Rng& rng) {
  std::uniform_int_distribution<int> start(0, 4);
  std::uniform_real_distribution<double> act(-1.0, 1.0);
  std::vector<envs::Trajectory> out;
  for (int m = 0; m < count; ++m) {
    envs::Trajectory t;
    t.states.resize(length + 1, 1);
    t.actions.resize(length, 1);
    Vector rew(length);
    int s = start(rng);
    for (int k = 0; k <= length; ++k) {
      t.states(k, 0) = s;
      if (k < length) {
        t.actions(k, 0) = act(rng);
        rew(k) = r[static_cast<std::size_t>(s)];
        s = std::min(s + 1, 4);
      }
    }
    t.rewards = rew;
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(ValueTail, GammaZeroRegressesOntoConstantReward) {
  Rng rng(11);
  const auto trajs = chain_trajectories({2.5, 2.5, 2.5, 2.5, 2.5}, 20, 10, rng);
  auto tail = make_value_tail(1, 1, 1, 0.0, {16}, 0.9, 3e-4, 0);
  TailTrainConfig cfg;
  cfg.steps = 30000;
  cfg.batch_size = 64;
  train_value_tail(tail, make_tail_windows(trajs, 1), cfg);
  const auto windows = make_tail_windows(trajs, 1);
  const auto batch = tail_batch(tail, windows);
  EXPECT_LT((tail.evaluate(batch.now).array() - 2.5).abs().maxCoeff(), 0.05);
}

TEST(ValueTail, MomentumOneFreezesTarget) {
  Rng rng(12);
  const auto trajs = chain_trajectories({1, 2, 3, 4, 5}, 10, 10, rng);
  auto tail = make_value_tail(1, 1, 1, 0.9, {16}, 1.0, 1e-3, 0);
  const auto before_target = tail.target;
  const auto before_online = tail.online;
  TailTrainConfig cfg;
  cfg.steps = 50;
  train_value_tail(tail, make_tail_windows(trajs, 1), cfg);
  EXPECT_TRUE(tail.target == before_target);
  EXPECT_FALSE(tail.online == before_online);
}

TEST(ValueTail, ChainMatchesValueIteration) {
  const std::vector<double> r = {1, 2, 3, 4, 5};
  const double gamma = 0.5;
  // Tabular oracle: V(s) = r(s) + gamma V(next(s)), F(s, a) = V(next(s)).
  oracle::TabularMdp mdp;
  mdp.n_states = 5;
  mdp.n_actions = 1;
  mdp.gamma = gamma;
  mdp.next_state = {1, 2, 3, 4, 4};
  mdp.reward = r;
  const auto v = oracle::evaluate_policy(mdp, oracle::Policy(5, 0));
  Rng rng(13);
  const auto trajs = chain_trajectories(r, 60, 12, rng);
  auto tail = make_value_tail(1, 1, 1, gamma, {32, 32}, 0.9, 3e-3, 1);
  TailTrainConfig cfg;
  cfg.steps = 4000;
  cfg.batch_size = 128;
  const auto windows = make_tail_windows(trajs, 1);
  const double residual_before = bellman_residual(tail, windows);
  train_value_tail(tail, windows, cfg);
  EXPECT_LT(bellman_residual(tail, windows), residual_before);
  for (int s = 0; s < 5; ++s) {
    Matrix x(2, 3);
    x << s, s, s, -0.5, 0.0, 0.5;
    const Vector f = tail.evaluate(x);
    const double expected = v[static_cast<std::size_t>(mdp.next(s, 0))];
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(f(i), expected, 0.05 * expected) << "state " << s;
  }
}

TEST(ValueTail, WindowWithoutExtraActionThrows) {
  auto tail = make_value_tail(1, 1, 2, 0.9, {8}, 0.9, 1e-3, 0);
  TailWindow w;
  w.state = Vector::Zero(1);
  w.next_state = Vector::Zero(1);
  w.actions = Matrix::Zero(2, 1);
  EXPECT_THROW(train_value_tail(tail, {w}, TailTrainConfig{}), InvalidArgument);
  EXPECT_THROW(make_value_tail(1, 1, 2, 0.9, {8}, 0.0, 1e-3, 0), InvalidArgument);
}

TEST(ValueTail, OracleTailRecoversLongReturn) {
  // Exact Q^H plus gamma^H times the simulated continuation equals the 4H-step return.
  const int K = 6, H = 3;
  const double gamma = 0.9;
  const auto env = envs::Env::make("point2");
  const auto fm = features::make_feature_map(features::FeatureKind::gaussian_linear, K, 2, 2, 21);
  const auto ens = ramp::testing::exact_point_ensemble(fm, H, gamma);
  Rng rng(14);
  const Vector w = random_vector(K + 1, rng);
  const auto reward = [&](const Vector& s, const Vector& a) { return w.dot(rewardfit::append_bias(fm.phi(s, a))); };
  std::uniform_real_distribution<double> start(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector s(2);
    s << start(rng), start(rng);
    Matrix seq(4 * H, 2);
    for (int h = 0; h < 4 * H; ++h) seq.row(h) = env.random_action(rng).transpose();
    double full = 0.0, tail_value = 0.0;
    Vector x = s;
    for (int h = 0; h < 4 * H; ++h) {
      const Vector a = seq.row(h).transpose();
      const double rh = std::pow(gamma, h) * reward(x, a);
      full += rh;
      if (h >= H) tail_value += rh / std::pow(gamma, H);
      x = env.step(x, a);
    }
    const double q = rewardfit::q_estimate(ens, w, s, seq.topRows(H)) + std::pow(gamma, H) * tail_value;
    EXPECT_NEAR(q, full, 0.01 * std::max(1.0, std::abs(full)));
  }
}
