#pragma once

// Deterministic analytic environments. Dynamics are shared across tasks; a
// RewardTask only changes the reward, never the transition.

#include "ramp/core.hpp"
#include "ramp/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

namespace ramp::envs {

struct EnvSpec {
  int state_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  double dt = 1.0;
  int episode_length = 64;

  void validate() const {
    require(state_dim > 0 && action_dim > 0, "EnvSpec: dimensions must be positive");
    require(action_low.size() == action_dim && action_high.size() == action_dim, "EnvSpec: bound size mismatch");
    require((action_low.array() < action_high.array()).all(), "EnvSpec: action_low must be < action_high");
    require(dt > 0.0, "EnvSpec: dt must be positive");
    require(episode_length > 0, "EnvSpec: episode_length must be positive");
  }

  Vector clip_action(const Vector& a) const { return a.cwiseMax(action_low).cwiseMin(action_high); }
};

inline constexpr double kPointWorkspace = 10.0;

struct Bump {
  Vector center;
  double radius = 1.0;
  double magnitude = 0.0;
};

enum class TaskKind { point_goal, point_perturbed, reacher_goal, pendulum_balance };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::point_goal: return "point_goal";
    case TaskKind::point_perturbed: return "point_perturbed";
    case TaskKind::reacher_goal: return "reacher_goal";
    case TaskKind::pendulum_balance: return "pendulum_balance";
  }
  return "?";
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "point_goal") return TaskKind::point_goal;
  if (s == "point_perturbed") return TaskKind::point_perturbed;
  if (s == "reacher_goal") return TaskKind::reacher_goal;
  if (s == "pendulum_balance") return TaskKind::pendulum_balance;
  throw InvalidArgument("unknown task kind '" + s + "'");
}

struct RewardTask {
  TaskKind kind = TaskKind::point_goal;
  Vector goal;
  double action_penalty_coeff = 0.1;
  std::vector<Bump> perturbations;
};

struct Trajectory {
  Matrix states;   // (T+1) x state_dim, one row per time step
  Matrix actions;  // T x action_dim
  std::optional<Vector> rewards;

  int length() const { return static_cast<int>(actions.rows()); }
};

struct OfflineDataset {
  std::string env_id;
  EnvSpec spec;
  std::vector<Trajectory> trajectories;
  std::string provenance;

  bool has_rewards() const { return !trajectories.empty() && trajectories.front().rewards.has_value(); }
};

// ---------------------------------------------------------------------------
// Point mass: s' = clamp(s + dt * clip(a), +-10)

inline void check_dims(const Vector& s, const Vector& a, const EnvSpec& spec) {
  if (s.size() != spec.state_dim) throw InvalidArgument("state dimension mismatch");
  if (a.size() != spec.action_dim) throw InvalidArgument("action dimension mismatch");
}

inline Vector point_step(const Vector& state, const Vector& action, const EnvSpec& spec) {
  check_dims(state, action, spec);
  Vector next = state + spec.dt * spec.clip_action(action);
  return next.cwiseMax(-kPointWorkspace).cwiseMin(kPointWorkspace);
}

inline double point_reward(const Vector& state, const Vector& action, const RewardTask& task) {
  if (state.size() != task.goal.size()) throw InvalidArgument("point_reward: goal dimension mismatch");
  return -(state - task.goal).norm() - task.action_penalty_coeff * action.squaredNorm();
}

inline double point_perturbed_reward(const Vector& state, const Vector& action, const RewardTask& task) {
  double r = point_reward(state, action, task);
  for (const Bump& b : task.perturbations) {
    if (!(b.radius > 0.0)) throw InvalidArgument("point_perturbed_reward: bump radius must be positive");
    if (b.center.size() != state.size()) throw InvalidArgument("point_perturbed_reward: bump center dimension mismatch");
    r += b.magnitude * std::exp(-(state - b.center).squaredNorm() / (b.radius * b.radius));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Double pendulum, unit masses and lengths, absolute angles from the downward
// vertical. State (th1, th2, w1, w2); torque tau1 at the shoulder, tau2 at the elbow.

inline constexpr double kGravity = 9.81;

inline std::array<double, 4> pendulum_derivatives(const std::array<double, 4>& x, double tau1, double tau2) {
  const double th1 = x[0], th2 = x[1], w1 = x[2], w2 = x[3];
  const double c = std::cos(th1 - th2);
  const double s = std::sin(th1 - th2);
  // Mass matrix [[2, c], [c, 1]]; generalized forces from joint torques.
  const double f1 = -s * w2 * w2 - 2.0 * kGravity * std::sin(th1) + (tau1 - tau2);
  const double f2 = s * w1 * w1 - kGravity * std::sin(th2) + tau2;
  const double det = 2.0 - c * c;
  const double a1 = (f1 - c * f2) / det;
  const double a2 = (2.0 * f2 - c * f1) / det;
  return {w1, w2, a1, a2};
}

inline double pendulum_energy(const Vector& state) {
  const double th1 = state(0), th2 = state(1), w1 = state(2), w2 = state(3);
  const double kinetic = w1 * w1 + 0.5 * w2 * w2 + std::cos(th1 - th2) * w1 * w2;
  const double potential = -2.0 * kGravity * std::cos(th1) - kGravity * std::cos(th2);
  return kinetic + potential;
}

inline Vector pendulum_step(const Vector& state, const Vector& action, const EnvSpec& spec) {
  check_dims(state, action, spec);
  if (!state.allFinite()) throw NumericFailure("pendulum_step: non-finite state");
  const Vector tau = spec.clip_action(action);
  const double h = spec.dt;
  std::array<double, 4> x{state(0), state(1), state(2), state(3)};
  auto axpy = [](const std::array<double, 4>& a, double k, const std::array<double, 4>& d) {
    return std::array<double, 4>{a[0] + k * d[0], a[1] + k * d[1], a[2] + k * d[2], a[3] + k * d[3]};
  };
  const auto k1 = pendulum_derivatives(x, tau(0), tau(1));
  const auto k2 = pendulum_derivatives(axpy(x, h / 2, k1), tau(0), tau(1));
  const auto k3 = pendulum_derivatives(axpy(x, h / 2, k2), tau(0), tau(1));
  const auto k4 = pendulum_derivatives(axpy(x, h, k3), tau(0), tau(1));
  Vector next(4);
  for (int i = 0; i < 4; ++i) next(i) = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  if (!next.allFinite()) throw NumericFailure("pendulum_step: integration produced a non-finite state");
  next(0) = wrap_angle(next(0));
  next(1) = wrap_angle(next(1));
  return next;
}

/// Height of the second link's tip above the pivot.
inline double pendulum_tip_height(const Vector& state) { return -std::cos(state(0)) - std::cos(state(1)); }

inline double pendulum_reward(const Vector& state, const Vector& action, const RewardTask& task) {
  return pendulum_tip_height(state) - task.action_penalty_coeff * action.squaredNorm();
}

// ---------------------------------------------------------------------------
// Planar two-link reacher with unit links; actions are joint velocities.

inline Vector reacher_tip(const Vector& theta) {
  Vector tip(2);
  tip << std::cos(theta(0)) + std::cos(theta(0) + theta(1)), std::sin(theta(0)) + std::sin(theta(0) + theta(1));
  return tip;
}

inline Vector reacher_step(const Vector& state, const Vector& action, const EnvSpec& spec) {
  check_dims(state, action, spec);
  return state + spec.dt * spec.clip_action(action);
}

inline double reacher_reward(const Vector& state, const Vector& action, const RewardTask& task) {
  if (task.goal.size() != 2) throw InvalidArgument("reacher_reward: goal must be 2-D");
  return -(reacher_tip(state) - task.goal).norm() - task.action_penalty_coeff * action.squaredNorm();
}

/// Elbow-positive inverse kinematics; targets outside the annulus are projected onto it.
inline Vector reacher_inverse_kinematics(const Vector& target) {
  const double r = std::clamp(target.norm(), 1e-6, 2.0);
  const double c2 = std::clamp((r * r - 2.0) / 2.0, -1.0, 1.0);
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(target(1), target(0)) - std::atan2(std::sin(q2), 1.0 + std::cos(q2));
  Vector q(2);
  q << q1, q2;
  return q;
}

// ---------------------------------------------------------------------------

enum class EnvKind { point, reacher, double_pendulum };

/// An environment instance: dynamics, reset distribution, expert controller and task presets.
class Env {
 public:
  static Env make(const std::string& id) {
    Env e;
    e.id_ = id;
    auto box = [](int d, double lo, double hi) {
      return std::pair<Vector, Vector>(Vector::Constant(d, lo), Vector::Constant(d, hi));
    };
    if (id == "point2" || id == "point3" || id == "point4" || id == "point_perturbed") {
      const int d = id == "point3" ? 3 : id == "point4" ? 4 : 2;
      e.kind_ = EnvKind::point;
      e.spec_.state_dim = d;
      e.spec_.action_dim = d;
      std::tie(e.spec_.action_low, e.spec_.action_high) = box(d, -1.0, 1.0);
      e.spec_.dt = 1.0;
      e.spec_.episode_length = 64;
    } else if (id == "reacher") {
      e.kind_ = EnvKind::reacher;
      e.spec_.state_dim = 2;
      e.spec_.action_dim = 2;
      std::tie(e.spec_.action_low, e.spec_.action_high) = box(2, -1.0, 1.0);
      e.spec_.dt = 0.2;
      e.spec_.episode_length = 64;
    } else if (id == "double_pendulum") {
      e.kind_ = EnvKind::double_pendulum;
      e.spec_.state_dim = 4;
      e.spec_.action_dim = 2;
      std::tie(e.spec_.action_low, e.spec_.action_high) = box(2, -2.0, 2.0);
      e.spec_.dt = 0.05;
      e.spec_.episode_length = 200;
    } else {
      throw InvalidArgument("unknown environment '" + id + "'");
    }
    e.spec_.validate();
    return e;
  }

  const std::string& id() const { return id_; }
  EnvKind kind() const { return kind_; }
  const EnvSpec& spec() const { return spec_; }
  EnvSpec& mutable_spec() { return spec_; }

  Vector step(const Vector& state, const Vector& action) const {
    switch (kind_) {
      case EnvKind::point: return point_step(state, action, spec_);
      case EnvKind::reacher: return reacher_step(state, action, spec_);
      case EnvKind::double_pendulum: return pendulum_step(state, action, spec_);
    }
    throw InvalidArgument("bad env kind");
  }

  double reward(const RewardTask& task, const Vector& state, const Vector& action) const {
    check_dims(state, action, spec_);
    switch (task.kind) {
      case TaskKind::point_goal:
        require(kind_ == EnvKind::point, "point_goal task requires a point environment");
        return point_reward(state, action, task);
      case TaskKind::point_perturbed:
        require(kind_ == EnvKind::point, "point_perturbed task requires a point environment");
        return point_perturbed_reward(state, action, task);
      case TaskKind::reacher_goal:
        require(kind_ == EnvKind::reacher, "reacher_goal task requires the reacher environment");
        return reacher_reward(state, action, task);
      case TaskKind::pendulum_balance:
        require(kind_ == EnvKind::double_pendulum, "pendulum_balance task requires the double pendulum");
        return pendulum_reward(state, action, task);
    }
    throw InvalidArgument("bad task kind");
  }

  Vector reset(Rng& rng) const {
    const int d = spec_.state_dim;
    Vector s = Vector::Zero(d);
    switch (kind_) {
      case EnvKind::point: {
        std::uniform_real_distribution<double> u(-8.0, 8.0);
        for (int i = 0; i < d; ++i) s(i) = u(rng);
        break;
      }
      case EnvKind::reacher:
      case EnvKind::double_pendulum: {
        std::uniform_real_distribution<double> u(-M_PI, M_PI);
        s(0) = u(rng);
        s(1) = u(rng);
        break;
      }
    }
    return s;
  }

  Vector random_action(Rng& rng) const {
    Vector a(spec_.action_dim);
    for (int i = 0; i < spec_.action_dim; ++i) {
      std::uniform_real_distribution<double> u(spec_.action_low(i), spec_.action_high(i));
      a(i) = u(rng);
    }
    return a;
  }

  /// Proportional controller (gain 1) toward the task goal, clipped to the action box.
  Vector expert_action(const Vector& state, const RewardTask& task) const {
    switch (kind_) {
      case EnvKind::point: return spec_.clip_action(task.goal - state);
      case EnvKind::reacher: {
        Vector err = reacher_inverse_kinematics(task.goal) - state;
        for (Eigen::Index i = 0; i < err.size(); ++i) err(i) = wrap_angle(err(i));
        return spec_.clip_action(err);
      }
      case EnvKind::double_pendulum: {
        Vector err(2);
        err << wrap_angle(task.goal(0) - state(0)), wrap_angle(task.goal(1) - state(1));
        return spec_.clip_action(err);
      }
    }
    throw InvalidArgument("bad env kind");
  }

  /// Goal for an offline behavior policy. Rewards for these tasks are never recorded.
  RewardTask sample_offline_task(Rng& rng) const {
    RewardTask t;
    switch (kind_) {
      case EnvKind::point: {
        t.kind = TaskKind::point_goal;
        std::uniform_real_distribution<double> u(-8.0, 8.0);
        t.goal = Vector(spec_.state_dim);
        for (int i = 0; i < spec_.state_dim; ++i) t.goal(i) = u(rng);
        break;
      }
      case EnvKind::reacher: {
        t.kind = TaskKind::reacher_goal;
        std::uniform_real_distribution<double> ur(0.5, 1.9), ua(-M_PI, M_PI);
        const double r = ur(rng), a = ua(rng);
        t.goal = Vector(2);
        t.goal << r * std::cos(a), r * std::sin(a);
        break;
      }
      case EnvKind::double_pendulum: {
        t.kind = TaskKind::pendulum_balance;
        std::uniform_real_distribution<double> u(-M_PI, M_PI);
        t.goal = Vector(2);
        t.goal << u(rng), u(rng);
        break;
      }
    }
    return t;
  }

  /// Divisors bringing [s; a] to roughly unit range before random features.
  Vector feature_input_scale() const {
    const int ds = spec_.state_dim, da = spec_.action_dim;
    Vector scale = Vector::Ones(ds + da);
    switch (kind_) {
      case EnvKind::point: scale.head(ds).setConstant(5.0); break;
      case EnvKind::reacher: break;
      case EnvKind::double_pendulum:
        scale.segment(2, 2).setConstant(5.0);
        scale.tail(da).setConstant(2.0);
        break;
    }
    return scale;
  }

  /// State entries wrapped to (-pi, pi] by step().
  std::vector<int> angular_dims() const {
    if (kind_ == EnvKind::double_pendulum) return {0, 1};
    return {};
  }

  /// The held-out test-time task used by the benchmarks.
  RewardTask default_task() const {
    RewardTask t;
    switch (kind_) {
      case EnvKind::point: {
        const double g[4] = {4.0, -3.0, 2.0, -1.0};
        t.kind = id_ == "point_perturbed" ? TaskKind::point_perturbed : TaskKind::point_goal;
        t.goal = Vector(spec_.state_dim);
        for (int i = 0; i < spec_.state_dim; ++i) t.goal(i) = g[i];
        t.action_penalty_coeff = 0.1;
        if (id_ == "point_perturbed") t.perturbations = default_perturbations();
        break;
      }
      case EnvKind::reacher:
        t.kind = TaskKind::reacher_goal;
        t.goal = Vector(2);
        t.goal << -1.0, 1.2;
        t.action_penalty_coeff = 0.1;
        break;
      case EnvKind::double_pendulum:
        t.kind = TaskKind::pendulum_balance;
        t.goal = Vector::Zero(2);
        t.action_penalty_coeff = 0.01;
        break;
    }
    return t;
  }

  /// Two unsafe regions and one small local maximum for the point_perturbed task.
  static std::vector<Bump> default_perturbations() {
    auto bump = [](double x, double y, double r, double m) {
      Bump b;
      b.center = Vector(2);
      b.center << x, y;
      b.radius = r;
      b.magnitude = m;
      return b;
    };
    return {bump(1.0, -1.0, 1.5, -3.0), bump(-2.0, 3.0, 2.0, -2.0), bump(-4.0, -4.0, 1.0, 0.5)};
  }

 private:
  std::string id_;
  EnvKind kind_ = EnvKind::point;
  EnvSpec spec_;
};

/// Re-simulates the stored actions and returns the reward sequence under `task`.
inline Vector trajectory_rewards(const Env& env, const RewardTask& task, const Trajectory& traj) {
  Vector r(traj.length());
  for (int t = 0; t < traj.length(); ++t)
    r(t) = env.reward(task, traj.states.row(t).transpose(), traj.actions.row(t).transpose());
  return r;
}

/// Epsilon-greedy rollouts of proportional experts. Trajectory m follows tasks[m % tasks.size()].
inline OfflineDataset collect_offline_dataset(const Env& env, const std::vector<RewardTask>& tasks, double epsilon,
                                              int num_trajectories, int episode_length, std::uint64_t seed) {
  require(!tasks.empty(), "collect_offline_dataset: task list is empty");
  require(epsilon >= 0.0 && epsilon <= 1.0, "collect_offline_dataset: epsilon must lie in [0, 1]");
  require(num_trajectories >= 1, "collect_offline_dataset: need at least one trajectory");
  require(episode_length >= 1, "collect_offline_dataset: episode_length must be positive");
  OfflineDataset ds;
  ds.env_id = env.id();
  ds.spec = env.spec();
  ds.spec.episode_length = episode_length;
  std::ostringstream prov;
  prov << "eps_greedy_proportional(epsilon=" << epsilon << ",tasks=" << tasks.size() << ",seed=" << seed << ")";
  ds.provenance = prov.str();
  const auto& spec = env.spec();
  for (int m = 0; m < num_trajectories; ++m) {
    Rng rng = make_rng(seed, 0x0ff1, static_cast<std::uint64_t>(m));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const RewardTask& task = tasks[static_cast<std::size_t>(m) % tasks.size()];
    Trajectory traj;
    traj.states.resize(episode_length + 1, spec.state_dim);
    traj.actions.resize(episode_length, spec.action_dim);
    Vector s = env.reset(rng);
    traj.states.row(0) = s.transpose();
    for (int t = 0; t < episode_length; ++t) {
      const bool explore = coin(rng) < epsilon;
      Vector a = explore ? env.random_action(rng) : env.expert_action(s, task);
      s = env.step(s, a);
      traj.actions.row(t) = a.transpose();
      traj.states.row(t + 1) = s.transpose();
    }
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

inline std::vector<RewardTask> sample_offline_tasks(const Env& env, int count, std::uint64_t seed) {
  require(count >= 1, "sample_offline_tasks: count must be positive");
  Rng rng = make_rng(seed, 0x7a5c);
  std::vector<RewardTask> tasks;
  for (int i = 0; i < count; ++i) tasks.push_back(env.sample_offline_task(rng));
  return tasks;
}

// ---------------------------------------------------------------------------
// RAMPDS01 binary format

inline constexpr char kDatasetMagic[8] = {'R', 'A', 'M', 'P', 'D', 'S', '0', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::string encode_dataset(const OfflineDataset& ds) {
  require(!ds.trajectories.empty(), "encode_dataset: dataset has no trajectories");
  const int ds_dim = ds.spec.state_dim, da_dim = ds.spec.action_dim, len = ds.spec.episode_length;
  const bool has_rewards = ds.has_rewards();
  io::ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 8));
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds_dim));
  w.u32(static_cast<std::uint32_t>(da_dim));
  w.u32(static_cast<std::uint32_t>(len));
  w.u64(ds.trajectories.size());
  w.u8(has_rewards ? 1 : 0);
  for (const Trajectory& t : ds.trajectories) {
    require(t.states.rows() == len + 1 && t.states.cols() == ds_dim, "encode_dataset: inconsistent state block");
    require(t.actions.rows() == len && t.actions.cols() == da_dim, "encode_dataset: inconsistent action block");
    require(t.rewards.has_value() == has_rewards, "encode_dataset: mixed reward presence");
    for (Eigen::Index r = 0; r < t.states.rows(); ++r)
      for (Eigen::Index c = 0; c < t.states.cols(); ++c) w.f64(t.states(r, c));
    for (Eigen::Index r = 0; r < t.actions.rows(); ++r)
      for (Eigen::Index c = 0; c < t.actions.cols(); ++c) w.f64(t.actions(r, c));
    if (has_rewards) {
      require(t.rewards->size() == len, "encode_dataset: reward length mismatch");
      for (Eigen::Index i = 0; i < t.rewards->size(); ++i) w.f64((*t.rewards)(i));
    }
  }
  return w.take();
}

inline std::uint64_t dataset_file_size(int state_dim, int action_dim, int episode_length, std::uint64_t m,
                                       bool has_rewards) {
  const std::uint64_t per = static_cast<std::uint64_t>(episode_length + 1) * state_dim +
                            static_cast<std::uint64_t>(episode_length) * action_dim +
                            (has_rewards ? static_cast<std::uint64_t>(episode_length) : 0);
  return 8 + 4 * 4 + 8 + 1 + m * per * 8;
}

/// Decodes a RAMPDS01 payload. The format carries no env id; the caller supplies it.
inline OfflineDataset decode_dataset(std::string_view bytes, const std::string& env_id = "") {
  io::ByteReader r(bytes);
  if (r.remaining() < 8 || r.bytes(8) != std::string_view(kDatasetMagic, 8)) throw IoError("not a RAMPDS01 file");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) throw IoError("unsupported dataset version " + std::to_string(version));
  OfflineDataset ds;
  ds.env_id = env_id;
  ds.spec.state_dim = static_cast<int>(r.u32());
  ds.spec.action_dim = static_cast<int>(r.u32());
  ds.spec.episode_length = static_cast<int>(r.u32());
  const std::uint64_t m = r.u64();
  const bool has_rewards = r.u8() != 0;
  if (ds.spec.state_dim <= 0 || ds.spec.action_dim <= 0 || ds.spec.episode_length <= 0)
    throw IoError("dataset header has non-positive dimensions");
  const std::uint64_t expected =
      dataset_file_size(ds.spec.state_dim, ds.spec.action_dim, ds.spec.episode_length, m, has_rewards);
  if (expected != bytes.size()) throw IoError("dataset size does not match its header");
  if (!env_id.empty()) {
    Env env = Env::make(env_id);
    if (env.spec().state_dim != ds.spec.state_dim || env.spec().action_dim != ds.spec.action_dim)
      throw InvalidArgument("dataset dimensions do not match environment '" + env_id + "'");
    ds.spec.action_low = env.spec().action_low;
    ds.spec.action_high = env.spec().action_high;
    ds.spec.dt = env.spec().dt;
  }
  const int len = ds.spec.episode_length;
  for (std::uint64_t i = 0; i < m; ++i) {
    Trajectory t;
    t.states.resize(len + 1, ds.spec.state_dim);
    t.actions.resize(len, ds.spec.action_dim);
    for (Eigen::Index a = 0; a < t.states.rows(); ++a)
      for (Eigen::Index b = 0; b < t.states.cols(); ++b) t.states(a, b) = r.f64();
    for (Eigen::Index a = 0; a < t.actions.rows(); ++a)
      for (Eigen::Index b = 0; b < t.actions.cols(); ++b) t.actions(a, b) = r.f64();
    if (has_rewards) {
      Vector rw(len);
      for (int k = 0; k < len; ++k) rw(k) = r.f64();
      t.rewards = std::move(rw);
    }
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

inline void write_dataset(const std::string& path, const OfflineDataset& ds) { io::write_file(path, encode_dataset(ds)); }

inline OfflineDataset read_dataset(const std::string& path, const std::string& env_id = "") {
  return decode_dataset(io::read_file(path), env_id);
}

/// One row per time step: trajectory, t, s_0..s_{d-1}, a_0..a_{k-1}[, r]. The final state row has empty action cells.
inline std::string dataset_to_csv(const OfflineDataset& ds) {
  std::ostringstream out;
  out.precision(17);
  const bool has_rewards = ds.has_rewards();
  out << "trajectory,t";
  for (int i = 0; i < ds.spec.state_dim; ++i) out << ",s" << i;
  for (int i = 0; i < ds.spec.action_dim; ++i) out << ",a" << i;
  if (has_rewards) out << ",r";
  out << "\n";
  for (std::size_t m = 0; m < ds.trajectories.size(); ++m) {
    const Trajectory& t = ds.trajectories[m];
    for (Eigen::Index k = 0; k < t.states.rows(); ++k) {
      out << m << "," << k;
      for (Eigen::Index i = 0; i < t.states.cols(); ++i) out << "," << t.states(k, i);
      const bool last = k == t.actions.rows();
      for (Eigen::Index i = 0; i < t.actions.cols(); ++i) {
        out << ",";
        if (!last) out << t.actions(k, i);
      }
      if (has_rewards) {
        out << ",";
        if (!last) out << (*t.rewards)(k);
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace ramp::envs
