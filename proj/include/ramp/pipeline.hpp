#pragma once

// End-to-end pipelines shared by the CLI and the acceptance suite:
// data generation, offline pre-training, online adaptation, and the ablation sweeps.

#include "ramp/adaptation.hpp"
#include "ramp/baseline.hpp"
#include "ramp/checkpoint.hpp"
#include "ramp/config.hpp"
#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/metrics.hpp"
#include "ramp/oracle.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace ramp::pipeline {

inline envs::OfflineDataset gen_data(const config::ExperimentConfig& cfg) {
  const envs::Env env = envs::Env::make(cfg.env);
  const int ep = cfg.dataset.episode_length > 0 ? cfg.dataset.episode_length : env.spec().episode_length;
  const auto tasks = envs::sample_offline_tasks(env, cfg.dataset.num_tasks, derive_seed(cfg.seed, 0xda7a));
  return envs::collect_offline_dataset(env, tasks, cfg.dataset.epsilon, cfg.dataset.num_trajectories, ep,
                                       derive_seed(cfg.seed, 0xc011));
}

/// Trajectory count and the per-dimension state bounding box.
inline std::string coverage_summary(const envs::OfflineDataset& ds) {
  std::ostringstream out;
  out << "trajectories=" << ds.trajectories.size() << " state_box=";
  const int d = ds.spec.state_dim;
  Vector lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& t : ds.trajectories) {
    lo = lo.cwiseMin(t.states.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(t.states.colwise().maxCoeff().transpose());
  }
  for (int i = 0; i < d; ++i) out << (i ? "x" : "") << "[" << metrics::fmt(lo(i)) << "," << metrics::fmt(hi(i)) << "]";
  return out.str();
}

inline features::FeatureMap make_feature_map(const config::ExperimentConfig& cfg, const envs::Env& env) {
  return features::make_feature_map(cfg.features.kind, cfg.features.num_features, env.spec().state_dim,
                                    env.spec().action_dim, derive_seed(cfg.seed, 0xfea), env.feature_input_scale());
}

inline checkpoint::Checkpoint pretrain(const config::ExperimentConfig& cfg, const envs::OfflineDataset& data,
                                       std::vector<qbasis::LossRecord>* log = nullptr) {
  config::validate(cfg);
  if (data.env_id != cfg.env)
    throw InvalidArgument("pretrain: dataset environment '" + data.env_id + "' does not match config env '" + cfg.env + "'");
  const envs::Env env = envs::Env::make(cfg.env);
  checkpoint::Checkpoint ck;
  ck.seed = cfg.seed;
  ck.config_json = config::to_json(cfg).dump();
  ck.feature_map = make_feature_map(cfg, env);
  const auto cumulants = features::build_cumulant_dataset(data, ck.feature_map, cfg.features.gamma,
                                                          cfg.features.horizon, cfg.features.stride);
  ck.ensemble = qbasis::train_qbasis(cumulants, config::qbasis_config(cfg), log);
  return ck;
}

inline void check_compatible(const config::ExperimentConfig& cfg, const checkpoint::Checkpoint& ck) {
  const envs::Env env = envs::Env::make(cfg.env);
  if (!ck.config_json.empty()) {
    const std::string trained_on = config::parse(ck.config_json).env;
    if (trained_on != cfg.env)
      throw InvalidArgument("checkpoint was pretrained on '" + trained_on + "', config env is '" + cfg.env + "'");
  }
  if (ck.ensemble.state_dim != env.spec().state_dim || ck.ensemble.action_dim != env.spec().action_dim)
    throw InvalidArgument("checkpoint dimensions do not match environment '" + cfg.env + "'");
  if (ck.ensemble.horizon != cfg.planner_horizon())
    throw InvalidArgument("checkpoint horizon " + std::to_string(ck.ensemble.horizon) +
                          " does not match the configured horizon " + std::to_string(cfg.planner_horizon()));
}

inline adaptation::AdaptationResult adapt(const config::ExperimentConfig& cfg, const checkpoint::Checkpoint& ck,
                                          const envs::OfflineDataset* offline = nullptr) {
  check_compatible(cfg, ck);
  const envs::Env env = config::make_env(cfg);
  return adaptation::run_online_adaptation(env, config::make_task(cfg, env), ck.ensemble, ck.feature_map,
                                           config::adaptation_config(cfg), derive_seed(cfg.seed, 0xada), offline);
}

struct RunResult {
  adaptation::AdaptationResult adaptation;
  checkpoint::Checkpoint checkpoint;
};

/// gen-data, pretrain and adapt in one process.
inline RunResult run_all(const config::ExperimentConfig& cfg) {
  const auto data = gen_data(cfg);
  RunResult r;
  r.checkpoint = pretrain(cfg, data);
  r.adaptation = adapt(cfg, r.checkpoint, &data);
  return r;
}

// ---------------------------------------------------------------------------
// Truncated-Q error comparison

struct QErrorResult {
  double ramp_error = 0.0;
  double rollout_error = 0.0;  // NaN unless the dynamics baseline ran
  double dynamics_one_step_error = 0.0;
  int windows = 0;
};

/// Held-out windows from fresh epsilon-greedy trajectories (a seed stream disjoint from the training data).
inline std::vector<oracle::EvalWindow> heldout_windows(const config::ExperimentConfig& cfg, const envs::Env& env,
                                                       int count) {
  const int ep = cfg.dataset.episode_length > 0 ? cfg.dataset.episode_length : env.spec().episode_length;
  const int H = cfg.features.horizon;
  const int per_traj = (ep - H) / H + 1;
  const int m = std::max(1, (count + per_traj - 1) / per_traj);
  const auto tasks = envs::sample_offline_tasks(env, cfg.dataset.num_tasks, derive_seed(cfg.seed, 0x4e1d));
  const auto data = envs::collect_offline_dataset(env, tasks, cfg.dataset.epsilon, m, ep, derive_seed(cfg.seed, 0x4e1e));
  auto windows = oracle::windows_from_trajectories(data.trajectories, H, H);
  if (static_cast<int>(windows.size()) > count) windows.resize(static_cast<std::size_t>(count));
  return windows;
}

/// q_estimate (weights from the exploration phase) against Monte-Carlo truncated Q on held-out
/// windows; with `with_rollout`, also the one-step dynamics model's rollout estimate.
inline QErrorResult q_error_experiment(const config::ExperimentConfig& cfg, bool with_rollout) {
  const envs::Env env = config::make_env(cfg);
  const envs::RewardTask task = config::make_task(cfg, env);
  const auto data = gen_data(cfg);
  const auto ck = pretrain(cfg, data);
  config::ExperimentConfig explore = cfg;
  explore.adapt.budget = cfg.regression.exploration_steps;
  const auto fit = adapt(explore, ck, &data);
  const Vector w = fit.weights.w;
  const auto windows = heldout_windows(cfg, env, cfg.ablation.eval_windows);
  const double gamma = cfg.features.gamma;

  QErrorResult r;
  r.windows = static_cast<int>(windows.size());
  r.ramp_error = oracle::q_error_metric(
      [&](const Vector& s, const Matrix& a) { return rewardfit::q_estimate(ck.ensemble, w, s, a); }, env, task, windows,
      gamma);
  r.rollout_error = std::numeric_limits<double>::quiet_NaN();
  if (with_rollout) {
    baseline::DynamicsConfig dc;
    const int in = env.spec().state_dim + env.spec().action_dim;
    dc.hidden.assign(2, cfg.baseline.width > 0
                            ? cfg.baseline.width
                            : baseline::width_for_parameter_count(in, env.spec().state_dim,
                                                                  ck.ensemble.members.front().parameter_count()));
    dc.epochs = cfg.baseline.epochs;
    dc.batch_size = cfg.baseline.batch_size;
    dc.learning_rate = cfg.baseline.learning_rate;
    dc.seed = derive_seed(cfg.seed, 0xd7);
    dc.angular_dims = env.angular_dims();
    const auto dyn = baseline::train_dynamics(data, dc);
    r.dynamics_one_step_error = dyn.heldout_one_step_error;
    const baseline::RewardFn reward = [&](const Vector& s, const Vector& a) { return env.reward(task, s, a); };
    r.rollout_error = oracle::q_error_metric(
        [&](const Vector& s, const Matrix& a) { return baseline::rollout_eval_q(dyn.model, reward, s, a, gamma); }, env,
        task, windows, gamma);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Ablation sweeps

struct Cell {
  std::string axis;
  std::string value;
  std::vector<double> per_seed;

  double mean() const {
    double s = 0.0;
    for (double v : per_seed) s += v;
    return per_seed.empty() ? 0.0 : s / static_cast<double>(per_seed.size());
  }
  /// Sample standard deviation (n - 1).
  double stddev() const {
    if (per_seed.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : per_seed) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(per_seed.size() - 1));
  }
};

inline std::string cells_csv(const std::vector<Cell>& cells, const std::string& metric) {
  std::ostringstream out;
  out << "axis,value,metric,mean,std,n,per_seed\n";
  for (const auto& c : cells) {
    out << c.axis << ',' << c.value << ',' << metric << ',' << metrics::fmt(c.mean()) << ',' << metrics::fmt(c.stddev())
        << ',' << c.per_seed.size() << ',';
    for (std::size_t i = 0; i < c.per_seed.size(); ++i) out << (i ? ";" : "") << metrics::fmt(c.per_seed[i]);
    out << "\n";
  }
  return out.str();
}

using SeedFn = std::function<double(const config::ExperimentConfig&)>;

/// Runs `fn` for seeds cfg.seed, cfg.seed + 1, ... (ablation.seeds of them).
inline Cell sweep_seeds(const config::ExperimentConfig& cfg, const std::string& axis, const std::string& value,
                        const SeedFn& fn) {
  Cell c{axis, value, {}};
  for (int i = 0; i < cfg.ablation.seeds; ++i) {
    config::ExperimentConfig run = cfg;
    run.seed = cfg.seed + static_cast<std::uint64_t>(i);
    c.per_seed.push_back(fn(run));
  }
  return c;
}

inline double final_return(const config::ExperimentConfig& cfg) { return run_all(cfg).adaptation.final_eval_mean(); }

struct Ablation {
  std::string metric;
  std::vector<Cell> cells;
};

inline Ablation ablate(const config::ExperimentConfig& cfg, const std::string& which) {
  Ablation out;
  if (which == "features") {
    out.metric = "final_return";
    for (const auto& kind : cfg.ablation.feature_kinds) {
      config::ExperimentConfig c = cfg;
      c.features.kind = features::feature_kind_from_string(kind);
      out.cells.push_back(sweep_seeds(c, "features", kind, final_return));
    }
  } else if (which == "dim") {
    out.metric = "final_return";
    for (int k : cfg.ablation.dims) {
      config::ExperimentConfig c = cfg;
      c.features.num_features = k;
      out.cells.push_back(sweep_seeds(c, "dim", std::to_string(k), final_return));
    }
  } else if (which == "statedim") {
    out.metric = "q_abs_error";
    for (int d : cfg.ablation.state_dims) {
      config::ExperimentConfig c = cfg;
      c.env = "point" + std::to_string(d);
      c.task.specified = false;
      out.cells.push_back(sweep_seeds(c, "statedim", std::to_string(d), [](const config::ExperimentConfig& r) {
        return q_error_experiment(r, false).ramp_error;
      }));
    }
  } else if (which == "table1") {
    out.metric = "q_abs_error";
    Cell ramp{"method", "ramp", {}}, mbrl{"method", "mbrl", {}};
    for (int i = 0; i < cfg.ablation.seeds; ++i) {
      config::ExperimentConfig run = cfg;
      run.seed = cfg.seed + static_cast<std::uint64_t>(i);
      const auto r = q_error_experiment(run, true);
      ramp.per_seed.push_back(r.ramp_error);
      mbrl.per_seed.push_back(r.rollout_error);
    }
    out.cells = {ramp, mbrl};
  } else {
    throw InvalidArgument("unknown ablation axis '" + which + "' (expected features|dim|statedim|table1)");
  }
  return out;
}

}  // namespace ramp::pipeline
