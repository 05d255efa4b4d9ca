#pragma once

// The online phase: random exploration, reward regression onto the random
// features, then closed-loop MPC with per-step RLS updates, optional Q-basis
// finetuning and value-tail training, and periodic greedy evaluation.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/planner.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ramp::adaptation {

enum class RegressionMode { online, offline_relabel };

inline std::string to_string(RegressionMode m) { return m == RegressionMode::online ? "online" : "offline_relabel"; }

inline RegressionMode regression_mode_from_string(const std::string& s) {
  if (s == "online") return RegressionMode::online;
  if (s == "offline_relabel") return RegressionMode::offline_relabel;
  throw InvalidArgument("unknown regression mode '" + s + "'");
}

struct AdaptationConfig {
  int budget = 10000;
  int exploration_steps = 2500;
  /// Ridge lambda under the averaged objective at the end of the initial fit;
  /// negative selects n^{-1/2}.
  double lambda = -1.0;
  RegressionMode mode = RegressionMode::online;
  planner::PlannerConfig planner;

  bool finetune_enabled = false;
  int finetune_every = 800;
  qbasis::FinetuneConfig finetune;

  bool tail_enabled = false;
  int tail_update_every = 800;
  std::vector<int> tail_hidden = {64, 64};
  double tail_momentum = 0.995;
  double tail_learning_rate = 1e-3;
  planner::TailTrainConfig tail_train;

  int eval_every = 800;
  int eval_episodes = 5;
  /// Episode length override; 0 keeps the environment default.
  int episode_length = 0;
  bool log_wall_time = false;

  void validate() const {
    require(budget >= 0 && exploration_steps >= 0, "adaptation: budget and exploration_steps must be >= 0");
    if (budget < exploration_steps)
      throw InvalidArgument("adaptation: budget (" + std::to_string(budget) + ") < exploration_steps (" +
                            std::to_string(exploration_steps) + ")");
    require(std::isfinite(lambda), "adaptation: lambda must be finite");
    require(finetune_every >= 1 && tail_update_every >= 1 && eval_every >= 1, "adaptation: cadences must be >= 1");
    require(eval_episodes >= 0, "adaptation: eval_episodes must be >= 0");
    require(episode_length >= 0, "adaptation: episode_length must be >= 0");
    planner.validate();
  }
};

/// One row per completed episode; the columns of the metrics CSV.
struct MetricsRow {
  std::int64_t step = 0;
  int episode = 0;
  double episode_return = 0.0;
  double regression_mse = 0.0;
  double regression_r2 = 0.0;
  double q_abs_error = 0.0;
  double variance_penalty_mean = 0.0;
  double wall_ms = 0.0;
  bool exploration = false;
};

struct EvalRecord {
  std::int64_t step = 0;
  std::vector<double> returns;
  double mean() const {
    double s = 0.0;
    for (double r : returns) s += r;
    return returns.empty() ? 0.0 : s / static_cast<double>(returns.size());
  }
};

struct AdaptationResult {
  std::vector<MetricsRow> rows;
  std::vector<EvalRecord> evals;
  std::vector<double> random_returns;  // uniform-random policy from the evaluation starts
  rewardfit::RewardWeights weights;
  qbasis::QBasisEnsemble ensemble;  // after any finetuning
  std::optional<planner::ValueTail> tail;
  std::vector<envs::Trajectory> online_trajectories;
  std::int64_t steps_taken = 0;

  double final_eval_mean() const { return evals.empty() ? 0.0 : evals.back().mean(); }
};

/// Start state of evaluation episode i; shared by the planner and random evaluations.
inline Vector eval_start(const envs::Env& env, std::uint64_t seed, int i) {
  Rng rng = make_rng(seed, 0xe7a1, static_cast<std::uint64_t>(i));
  return env.reset(rng);
}

using ActionFn = std::function<Vector(const Vector&, Rng&)>;

inline double run_episode(const envs::Env& env, const envs::RewardTask& task, Vector state, int length,
                          const ActionFn& act, Rng& rng, envs::Trajectory* record = nullptr) {
  double total = 0.0;
  if (record) {
    record->states.resize(length + 1, env.spec().state_dim);
    record->actions.resize(length, env.spec().action_dim);
    record->rewards = Vector(length);
    record->states.row(0) = state.transpose();
  }
  for (int t = 0; t < length; ++t) {
    const Vector a = env.spec().clip_action(act(state, rng));
    const double r = env.reward(task, state, a);
    total += r;
    state = env.step(state, a);
    if (record) {
      record->actions.row(t) = a.transpose();
      (*record->rewards)(t) = r;
      record->states.row(t + 1) = state.transpose();
    }
  }
  return total;
}

/// Undiscounted returns of the uniform-random policy from the evaluation starts.
inline std::vector<double> random_policy_returns(const envs::Env& env, const envs::RewardTask& task, int episodes,
                                                 int length, std::uint64_t seed) {
  std::vector<double> out;
  for (int i = 0; i < episodes; ++i) {
    Rng rng = make_rng(seed, 0x7a4d, static_cast<std::uint64_t>(i));
    out.push_back(run_episode(env, task, eval_start(env, seed, i), length,
                              [&](const Vector&, Rng& r) { return env.random_action(r); }, rng));
  }
  return out;
}

/// Greedy MPC episodes from the evaluation starts with frozen weights.
inline std::vector<double> evaluate_planner(const envs::Env& env, const envs::RewardTask& task,
                                            const qbasis::QBasisEnsemble& ens, const Vector& weights,
                                            const planner::PlannerConfig& pc, const planner::ValueTail* tail,
                                            int episodes, int length, std::uint64_t seed, std::uint64_t round) {
  std::vector<double> out;
  for (int i = 0; i < episodes; ++i) {
    Rng rng = make_rng(seed, 0xe7a2, round * 1000 + static_cast<std::uint64_t>(i));
    out.push_back(run_episode(env, task, eval_start(env, seed, i), length,
                              [&](const Vector& s, Rng& r) {
                                return planner::plan(ens, weights, s, env.spec(), pc, r, tail).first_action;
                              },
                              rng));
  }
  return out;
}

/// Mean |q_estimate - observed truncated return| over every H-window of a recorded episode.
inline double trajectory_q_error(const qbasis::QBasisEnsemble& ens, const Vector& weights,
                                 const envs::Trajectory& traj) {
  const qbasis::ReturnWindows w = qbasis::make_return_windows({traj}, ens.horizon, ens.gamma);
  if (w.inputs.cols() == 0) return 0.0;
  return (rewardfit::q_estimate_batch(ens, weights, w.inputs) - w.returns).cwiseAbs().mean();
}

/// Feature rows (n x (K+1), with bias) and rewards of the offline states relabeled under `task`.
inline std::pair<Matrix, Vector> relabel_offline(const envs::Env& env, const envs::RewardTask& task,
                                                 const features::FeatureMap& fmap, const envs::OfflineDataset& data) {
  std::size_t n = 0;
  for (const auto& t : data.trajectories) n += static_cast<std::size_t>(t.length());
  Matrix sa(fmap.input_dim(), static_cast<Eigen::Index>(n));
  Vector r(static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& t : data.trajectories)
    for (int k = 0; k < t.length(); ++k, ++c) {
      sa.col(c) << t.states.row(k).transpose(), t.actions.row(k).transpose();
      r(c) = env.reward(task, t.states.row(k).transpose(), t.actions.row(k).transpose());
    }
  return {rewardfit::append_bias(Matrix(fmap.phi_batch(sa).transpose())), r};
}

inline bool has_window(const std::vector<envs::Trajectory>& trajs, int horizon) {
  for (const auto& t : trajs)
    if (t.length() >= horizon) return true;
  return false;
}

inline AdaptationResult run_online_adaptation(const envs::Env& env, const envs::RewardTask& task,
                                              const qbasis::QBasisEnsemble& pretrained,
                                              const features::FeatureMap& fmap, const AdaptationConfig& cfg,
                                              std::uint64_t seed, const envs::OfflineDataset* offline = nullptr) {
  cfg.validate();
  require(cfg.planner.horizon == pretrained.horizon, "adaptation: planner horizon must equal the ensemble horizon");
  require(fmap.num_features == pretrained.num_features, "adaptation: feature map and ensemble disagree on K");
  require(fmap.state_dim == env.spec().state_dim && fmap.action_dim == env.spec().action_dim &&
              pretrained.state_dim == env.spec().state_dim && pretrained.action_dim == env.spec().action_dim,
          "adaptation: checkpoint dimensions do not match the environment");
  if (cfg.mode == RegressionMode::offline_relabel)
    require(offline != nullptr && !offline->trajectories.empty(), "adaptation: offline_relabel needs the offline dataset");
  else
    require(cfg.exploration_steps >= 1, "adaptation: online regression needs exploration_steps >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&]() {
    if (!cfg.log_wall_time) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  AdaptationResult res;
  res.ensemble = pretrained;
  const int K = fmap.num_features;
  const int episode_length = cfg.episode_length > 0 ? cfg.episode_length : env.spec().episode_length;
  const int H = pretrained.horizon;

  Rng explore_rng = make_rng(seed, 0xe4b1);
  Rng plan_rng = make_rng(seed, 0x91a4);

  // ---- phase 1: exploration and the initial fit
  std::vector<Vector> phi_rows;
  std::vector<double> rewards;
  std::int64_t step = 0;
  int episode = 0;
  Vector state;
  envs::Trajectory cur;
  int t_in_episode = 0;
  double ep_return = 0.0, ep_penalty = 0.0;
  int ep_planned = 0;

  auto begin_episode = [&]() {
    Rng reset_rng = make_rng(seed, 0x5e7, static_cast<std::uint64_t>(episode));
    state = env.reset(reset_rng);
    cur = envs::Trajectory();
    cur.states.resize(episode_length + 1, env.spec().state_dim);
    cur.actions.resize(episode_length, env.spec().action_dim);
    cur.rewards = Vector(episode_length);
    cur.states.row(0) = state.transpose();
    t_in_episode = 0;
    ep_return = ep_penalty = 0.0;
    ep_planned = 0;
  };

  auto phi_row = [&](const Vector& s, const Vector& a) { return rewardfit::append_bias(fmap.phi(s, a)); };

  std::optional<rewardfit::RlsState> rls;
  std::size_t diag_from = 0;  // first phi_rows index of the current episode

  auto close_episode = [&](bool exploring) {
    envs::Trajectory done = cur;
    done.states.conservativeResize(t_in_episode + 1, Eigen::NoChange);
    done.actions.conservativeResize(t_in_episode, Eigen::NoChange);
    done.rewards->conservativeResize(t_in_episode);
    MetricsRow row;
    row.step = step;
    row.episode = episode;
    row.episode_return = ep_return;
    row.exploration = exploring;
    row.variance_penalty_mean = ep_planned > 0 ? ep_penalty / ep_planned : 0.0;
    if (rls) {
      const std::size_t n = phi_rows.size() - diag_from;
      if (n > 0) {
        Matrix f(static_cast<Eigen::Index>(n), K + 1);
        Vector r(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
          f.row(static_cast<Eigen::Index>(i)) = phi_rows[diag_from + i].transpose();
          r(static_cast<Eigen::Index>(i)) = rewards[diag_from + i];
        }
        const auto d = rewardfit::regression_diagnostics(f, r, rls->w);
        row.regression_mse = d.mse;
        row.regression_r2 = d.r2;
      }
      row.q_abs_error = trajectory_q_error(res.ensemble, rls->w, done);
    }
    row.wall_ms = elapsed_ms();
    res.rows.push_back(row);
    res.online_trajectories.push_back(std::move(done));
    // Only the current episode's rows are needed once the initial fit exists.
    if (rls) {
      phi_rows.clear();
      rewards.clear();
    }
    diag_from = phi_rows.size();
    ++episode;
  };

  auto record_step = [&](const Vector& a, double r) {
    cur.actions.row(t_in_episode) = a.transpose();
    (*cur.rewards)(t_in_episode) = r;
    state = env.step(state, a);
    cur.states.row(t_in_episode + 1) = state.transpose();
    ep_return += r;
    ++t_in_episode;
    ++step;
  };

  begin_episode();
  for (int i = 0; i < cfg.exploration_steps; ++i) {
    const Vector a = env.random_action(explore_rng);
    const double r = env.reward(task, state, a);
    phi_rows.push_back(phi_row(state, a));
    rewards.push_back(r);
    record_step(a, r);
    if (t_in_episode == episode_length) {
      close_episode(true);
      begin_episode();
    }
  }

  {
    Matrix f;
    Vector r;
    if (cfg.mode == RegressionMode::offline_relabel) std::tie(f, r) = relabel_offline(env, task, fmap, *offline);
    const Eigen::Index n_off = f.rows();
    const auto n_on = static_cast<Eigen::Index>(phi_rows.size());
    f.conservativeResize(n_off + n_on, K + 1);
    r.conservativeResize(n_off + n_on);
    for (Eigen::Index i = 0; i < n_on; ++i) {
      f.row(n_off + i) = phi_rows[static_cast<std::size_t>(i)].transpose();
      r(n_off + i) = rewards[static_cast<std::size_t>(i)];
    }
    const double n = static_cast<double>(f.rows());
    const double ridge_lambda = cfg.lambda >= 0.0 ? cfg.lambda : 1.0 / std::sqrt(n);
    // RLS keeps an absolute regularizer; n * ridge_lambda reproduces ridge_fit(.., ridge_lambda) here.
    rls = rewardfit::rls_from_batch(f, r, std::max(n * ridge_lambda, 1e-12));
  }

  if (cfg.exploration_steps > 0 && t_in_episode > 0 && cfg.budget == cfg.exploration_steps) {
    close_episode(true);
  }

  // ---- phase 2: closed-loop MPC
  const std::vector<double> random_returns =
      random_policy_returns(env, task, cfg.eval_episodes, episode_length, seed);
  res.random_returns = random_returns;
  std::uint64_t eval_round = 0;
  auto evaluate = [&]() {
    EvalRecord rec;
    rec.step = step;
    const planner::ValueTail* tail = res.tail && res.tail->adam.step_count > 0 ? &*res.tail : nullptr;
    rec.returns = evaluate_planner(env, task, res.ensemble, rls->w, cfg.planner, tail, cfg.eval_episodes,
                                   episode_length, seed, eval_round++);
    res.evals.push_back(std::move(rec));
  };

  if (cfg.tail_enabled)
    res.tail = planner::make_value_tail(env.spec().state_dim, env.spec().action_dim, H, pretrained.gamma,
                                        cfg.tail_hidden, cfg.tail_momentum, cfg.tail_learning_rate, seed);

  Matrix plan_seq;
  int plan_pos = 0;
  std::int64_t mpc_steps = 0;
  while (step < cfg.budget) {
    const planner::ValueTail* tail = res.tail && res.tail->adam.step_count > 0 ? &*res.tail : nullptr;
    if (plan_seq.rows() == 0 || plan_pos >= cfg.planner.replan_every || plan_pos >= plan_seq.rows()) {
      const auto p = planner::plan(res.ensemble, rls->w, state, env.spec(), cfg.planner, plan_rng, tail);
      plan_seq = p.sequence;
      plan_pos = 0;
      ep_penalty += p.variance_penalty;
      ++ep_planned;
    }
    const Vector a = env.spec().clip_action(plan_seq.row(plan_pos++).transpose());
    const double r = env.reward(task, state, a);
    const Vector row = phi_row(state, a);
    rewardfit::rls_update(*rls, row, r);
    phi_rows.push_back(row);
    rewards.push_back(r);
    record_step(a, r);
    ++mpc_steps;
    if (t_in_episode == episode_length) {
      close_episode(false);
      begin_episode();
      plan_seq.resize(0, 0);
    }
    if (cfg.finetune_enabled && mpc_steps % cfg.finetune_every == 0 && has_window(res.online_trajectories, H)) {
      qbasis::FinetuneConfig fc = cfg.finetune;
      fc.seed = derive_seed(seed, 0xf1e, static_cast<std::uint64_t>(mpc_steps));
      res.ensemble = qbasis::finetune_qbasis(res.ensemble, rls->w, res.online_trajectories, fc);
    }
    if (res.tail && mpc_steps % cfg.tail_update_every == 0) {
      const auto windows = planner::make_tail_windows(res.online_trajectories, H);
      if (!windows.empty()) {
        planner::TailTrainConfig tc = cfg.tail_train;
        tc.seed = derive_seed(seed, 0x7a1, static_cast<std::uint64_t>(mpc_steps));
        planner::train_value_tail(*res.tail, windows, tc);
      }
    }
    if (mpc_steps % cfg.eval_every == 0) evaluate();
  }
  if (mpc_steps > 0) {
    if (t_in_episode > 0) close_episode(false);
    if (mpc_steps % cfg.eval_every != 0) evaluate();
  }

  res.weights = rls->snapshot();
  res.steps_taken = step;
  return res;
}

}  // namespace ramp::adaptation
