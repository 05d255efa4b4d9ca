#include "ramp/envs.hpp"
#include "ramp/oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

using namespace ramp;
using namespace ramp::oracle;

namespace {

envs::RewardTask point_goal(double c) {
  envs::RewardTask t;
  t.kind = envs::TaskKind::point_goal;
  t.goal = Vector::Zero(2);
  t.action_penalty_coeff = c;
  return t;
}

// V_pi from the linear system (I - gamma P_pi) V = R_pi, independent of value iteration.
std::vector<double> direct_solve(const TabularMdp& mdp, const Policy& pi) {
  Matrix a = Matrix::Identity(mdp.n_states, mdp.n_states);
  Vector r(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const int act = pi[static_cast<std::size_t>(s)];
    a(s, mdp.next(s, act)) -= mdp.gamma;
    r(s) = mdp.r(s, act);
  }
  const Vector v = a.partialPivLu().solve(r);
  return {v.data(), v.data() + v.size()};
}

TabularMdp cycle3(double gamma) {
  TabularMdp m;
  m.n_states = 3;
  m.n_actions = 1;
  m.gamma = gamma;
  m.next_state = {1, 2, 0};
  m.reward = {1, 0, 0};
  return m;
}

}  // namespace

TEST(McTruncatedQ, Examples) {
  const auto env = envs::Env::make("point2");
  Vector goal_state = Vector::Zero(2);
  EXPECT_EQ(mc_truncated_q(env, point_goal(0.0), goal_state, Matrix::Zero(4, 2), 0.9), 0.0);

  envs::RewardTask t = point_goal(0.0);
  Vector s(2);
  s << 1, 0;
  Matrix seq(2, 2);
  seq << -1, 0, -1, 0;
  EXPECT_DOUBLE_EQ(mc_truncated_q(env, t, s, seq, 1.0), -1.0);
}

TEST(QErrorMetric, ExactAndOffsetMethods) {
  const auto env = envs::Env::make("point2");
  const auto task = point_goal(0.0);
  const std::vector<EvalWindow> windows = {{Vector::Zero(2), Matrix::Zero(3, 2)}};
  const QFn exact = [&](const Vector& s, const Matrix& a) { return mc_truncated_q(env, task, s, a, 0.5); };
  const QFn off = [&](const Vector& s, const Matrix& a) { return exact(s, a) + 1.75; };
  EXPECT_EQ(q_error_metric(exact, env, task, windows, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(q_error_metric(off, env, task, windows, 0.5), 1.75);
  EXPECT_THROW(q_error_metric(exact, env, task, {}, 0.5), InvalidArgument);
}

TEST(QErrorMetric, ZeroOnlyOnAgreement) {
  const auto env = envs::Env::make("point2");
  const auto task = point_goal(0.1);
  Rng rng(1);
  std::vector<EvalWindow> windows;
  for (int i = 0; i < 10; ++i) {
    Matrix a(4, 2);
    for (int h = 0; h < 4; ++h) a.row(h) = env.random_action(rng).transpose();
    windows.push_back({env.reset(rng), a});
  }
  int calls = 0;
  const QFn one_off = [&](const Vector& s, const Matrix& a) {
    return mc_truncated_q(env, task, s, a, 0.9) + (calls++ == 3 ? 1e-3 : 0.0);
  };
  EXPECT_GT(q_error_metric(one_off, env, task, windows, 0.9), 0.0);
}

TEST(TabularQ, EmptySequenceIsValue) {
  Rng rng(2);
  const auto mdp = random_mdp(5, 3, 0.9, rng);
  const auto pi = random_policy(5, 3, rng);
  const auto v = evaluate_policy(mdp, pi);
  for (int s = 0; s < 5; ++s) EXPECT_EQ(tabular_multi_step_q(mdp, v, s, {}), v[static_cast<std::size_t>(s)]);
}

TEST(TabularQ, ConstantRewardMdp) {
  Rng rng(3);
  auto mdp = random_mdp(4, 2, 0.9, rng);
  std::fill(mdp.reward.begin(), mdp.reward.end(), 1.0);
  const auto pi = random_policy(4, 2, rng);
  for (const auto& seq : enumerate_sequences(2, 3))
    for (int s = 0; s < 4; ++s) EXPECT_NEAR(tabular_multi_step_q(mdp, pi, s, seq), 10.0, 1e-8);
}

TEST(TabularQ, ThreeCycle) {
  const auto mdp = cycle3(0.5);
  const auto v = evaluate_policy(mdp, {0, 0, 0});
  EXPECT_NEAR(v[0], 8.0 / 7.0, 1e-9);
  EXPECT_NEAR(v[1], 0.5 * 0.5 * 8.0 / 7.0, 1e-9);
}

TEST(TabularQ, ValueIterationMatchesLinearSolve) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const auto pi = random_policy(6, 3, rng);
    const auto a = evaluate_policy(mdp, pi), b = direct_solve(mdp, pi);
    for (int s = 0; s < 6; ++s) EXPECT_NEAR(a[static_cast<std::size_t>(s)], b[static_cast<std::size_t>(s)], 1e-8);
  }
}

TEST(TabularQ, FollowingPolicyGivesItsValue) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const auto pi = random_policy(6, 3, rng);
    const auto v = evaluate_policy(mdp, pi);
    for (int s = 0; s < 6; ++s) {
      std::vector<int> seq;
      int cur = s;
      for (int h = 0; h < 4; ++h) {
        seq.push_back(pi[static_cast<std::size_t>(cur)]);
        cur = mdp.next(cur, seq.back());
      }
      EXPECT_NEAR(tabular_multi_step_q(mdp, v, s, seq), v[static_cast<std::size_t>(s)], 1e-8);
    }
  }
}

TEST(Enumeration, BudgetAndOrder) {
  const auto seqs = enumerate_sequences(3, 2);
  ASSERT_EQ(seqs.size(), 9u);
  EXPECT_EQ(seqs[0], (std::vector<int>{0, 0}));
  EXPECT_EQ(seqs[1], (std::vector<int>{0, 1}));
  EXPECT_EQ(seqs[8], (std::vector<int>{2, 2}));
  EXPECT_EQ(enumerate_sequences(10, 2).size(), 100u);
  EXPECT_THROW(enumerate_sequences(3, 5), ResourceError);
  EXPECT_THROW(enumerate_sequences(101, 1), ResourceError);
}

TEST(GpiCheck, OptimalPolicyIsTight) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = random_mdp(5, 3, 0.9, rng);
    const auto report = gpi_check(mdp, {optimal_policy(mdp)}, 2);
    EXPECT_TRUE(report.holds);
    EXPECT_NEAR(report.first_gap, 0.0, 1e-7);
  }
}

TEST(GpiCheck, FiftyRandomMdps) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    std::vector<Policy> pis;
    for (int p = 0; p < 3; ++p) pis.push_back(random_policy(6, 3, rng));
    const auto report = gpi_check(mdp, pis, 3);
    EXPECT_TRUE(report.holds) << "trial " << trial << " gaps " << report.first_gap << " " << report.second_gap;
  }
}

TEST(GpiCheck, HorizonOneSecondGapIsZero) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = random_mdp(4, 3, 0.8, rng);
    const auto report = gpi_check(mdp, {random_policy(4, 3, rng), random_policy(4, 3, rng)}, 1);
    EXPECT_EQ(report.second_gap, 0.0);
  }
}

TEST(GpiCheck, TwoHundredTrialsNoViolation) {
  GpiTrialsConfig cfg;
  cfg.trials = 200;
  cfg.seed = 11;
  const auto agg = gpi_trials(cfg);
  EXPECT_TRUE(agg.holds);
  EXPECT_EQ(agg.violations, 0);
  EXPECT_EQ(agg.trials, 200);
  EXPECT_GE(agg.worst_gap(), -kGpiTolerance);
}

TEST(GpiCheck, Errors) {
  TabularMdp bad;
  bad.n_states = 2;
  bad.n_actions = 1;
  bad.next_state = {0, 5};
  bad.reward = {0, 0};
  EXPECT_THROW(gpi_check(bad, {{0, 0}}, 1), InvalidArgument);
  const auto ok = cycle3(0.5);
  EXPECT_THROW(gpi_check(ok, {}, 1), InvalidArgument);
  EXPECT_THROW(gpi_check(ok, {{0, 0, 0}}, 0), InvalidArgument);
}
