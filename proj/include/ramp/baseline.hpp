#pragma once

// One-step learned dynamics model (predicts normalized state deltas) and its
// autoregressive rollout evaluation of truncated Q-values.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace ramp::baseline {

struct DynamicsModel {
  tinynet::MlpParams network;
  qbasis::Standardizer input_norm;   // over [s; a]
  qbasis::Standardizer output_norm;  // over s' - s
  int state_dim = 0;
  int action_dim = 0;
  std::vector<int> angular_dims;  // state entries kept in (-pi, pi]

  Vector predict(const Vector& state, const Vector& action) const {
    require(state.size() == state_dim && action.size() == action_dim, "DynamicsModel: dimension mismatch");
    Vector x(state_dim + action_dim);
    x << state, action;
    Matrix next = state + output_norm.denormalize(tinynet::forward_batch(network, input_norm.normalize(x))).col(0);
    wrap_rows(next);
    return next.col(0);
  }

  /// Batched predict over columns of states / actions.
  Matrix predict_batch(const Matrix& states, const Matrix& actions) const {
    Matrix x(state_dim + action_dim, states.cols());
    x.topRows(state_dim) = states;
    x.bottomRows(action_dim) = actions;
    Matrix next = states + output_norm.denormalize(tinynet::forward_batch(network, input_norm.normalize(x)));
    wrap_rows(next);
    return next;
  }

  void wrap_rows(Matrix& states) const {
    for (int d : angular_dims)
      for (Eigen::Index c = 0; c < states.cols(); ++c) states(d, c) = wrap_angle(states(d, c));
  }
};

struct DynamicsConfig {
  std::vector<int> hidden = {256, 256};
  int epochs = 20;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Trailing fraction of trajectories held out for the one-step error report.
  double holdout_fraction = 0.1;
  /// Wrapped state entries; their deltas are learned modulo 2 pi.
  std::vector<int> angular_dims;
};

struct DynamicsFit {
  DynamicsModel model;
  double heldout_one_step_error = 0.0;  // mean Euclidean norm of the state error
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
};

struct Transitions {
  Matrix inputs;  // [s; a] x n
  Matrix deltas;  // (s' - s) x n
};

inline Transitions gather_transitions(const std::vector<envs::Trajectory>& trajs, int ds, int da,
                                      const std::vector<int>& angular_dims = {}) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += static_cast<std::size_t>(t.length());
  Transitions tr;
  tr.inputs.resize(ds + da, static_cast<Eigen::Index>(n));
  tr.deltas.resize(ds, static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& t : trajs)
    for (int k = 0; k < t.length(); ++k, ++c) {
      tr.inputs.col(c) << t.states.row(k).transpose(), t.actions.row(k).transpose();
      tr.deltas.col(c) = (t.states.row(k + 1) - t.states.row(k)).transpose();
      for (int d : angular_dims) tr.deltas(d, c) = wrap_angle(tr.deltas(d, c));
    }
  return tr;
}

/// Hidden width w such that a two-hidden-layer net (in -> w -> w -> out) has about `target_params` parameters.
inline int width_for_parameter_count(int in, int out, std::size_t target_params) {
  // w^2 + w (in + out + 2) + out = target
  const double b = in + out + 2.0;
  const double c = static_cast<double>(out) - static_cast<double>(target_params);
  const double w = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
  return std::max(1, static_cast<int>(std::lround(w)));
}

inline DynamicsFit train_dynamics(const envs::OfflineDataset& dataset, const DynamicsConfig& cfg) {
  require(!dataset.trajectories.empty(), "train_dynamics: empty dataset");
  require(cfg.epochs >= 0 && cfg.batch_size >= 1 && cfg.learning_rate >= 0.0, "train_dynamics: bad config");
  const int ds = dataset.spec.state_dim, da = dataset.spec.action_dim;
  const std::size_t m = dataset.trajectories.size();
  std::size_t n_hold = m > 1 ? static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(m))) : 0;
  if (n_hold >= m) n_hold = m - 1;
  std::vector<envs::Trajectory> train(dataset.trajectories.begin(), dataset.trajectories.end() - static_cast<long>(n_hold));
  std::vector<envs::Trajectory> held(dataset.trajectories.end() - static_cast<long>(n_hold), dataset.trajectories.end());
  for (int d : cfg.angular_dims) require(d >= 0 && d < ds, "train_dynamics: angular dimension out of range");
  const Transitions tr = gather_transitions(train, ds, da, cfg.angular_dims);
  require(tr.inputs.cols() > 0, "train_dynamics: no transitions");

  DynamicsFit fit;
  DynamicsModel& model = fit.model;
  model.state_dim = ds;
  model.action_dim = da;
  model.angular_dims = cfg.angular_dims;
  model.input_norm = qbasis::Standardizer::fit(tr.inputs);
  model.output_norm = qbasis::Standardizer::fit(tr.deltas);
  std::vector<int> sizes{ds + da};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(ds);
  model.network = tinynet::init_mlp(sizes, tinynet::Activation::tanh, derive_seed(cfg.seed, 0xd1a));

  const Matrix x = model.input_norm.normalize(tr.inputs);
  const Matrix y = model.output_norm.normalize(tr.deltas);
  const Eigen::Index n = x.cols();
  auto mse = [&](const tinynet::MlpParams& net) {
    return (tinynet::forward_batch(net, x) - y).squaredNorm() / static_cast<double>(n);
  };
  fit.initial_train_loss = mse(model.network);

  auto adam = tinynet::AdamState::for_params(model.network, cfg.learning_rate);
  Rng rng = make_rng(cfg.seed, 0xd5f1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Matrix xb(x.rows(), len), yb(y.rows(), len);
      for (Eigen::Index j = 0; j < len; ++j) {
        xb.col(j) = x.col(order[static_cast<std::size_t>(start + j)]);
        yb.col(j) = y.col(order[static_cast<std::size_t>(start + j)]);
      }
      const auto cache = tinynet::forward_cached(model.network, xb);
      const Matrix grad = (2.0 / static_cast<double>(len)) * (cache.output() - yb);
      if (!grad.allFinite()) throw NumericFailure("train_dynamics: non-finite loss");
      tinynet::adam_step(model.network, tinynet::backward_cached(model.network, cache, grad), adam);
    }
  }
  fit.final_train_loss = mse(model.network);

  const auto& eval_set = held.empty() ? train : held;
  const Transitions ht = gather_transitions(eval_set, ds, da, cfg.angular_dims);
  const Matrix pred = model.predict_batch(ht.inputs.topRows(ds), ht.inputs.bottomRows(da));
  Matrix err = pred - ht.inputs.topRows(ds) - ht.deltas;
  model.wrap_rows(err);
  fit.heldout_one_step_error = err.colwise().norm().mean();
  return fit;
}

using RewardFn = std::function<double(const Vector&, const Vector&)>;
using StepFn = std::function<Vector(const Vector&, const Vector&)>;

/// Sum_h gamma^{h-1} reward(s_h, a_h) with s_1 = state and s_{h+1} = step(s_h, a_h).
inline double rollout_return(const StepFn& step, const RewardFn& reward, const Vector& state,
                             const Matrix& action_sequence, double gamma) {
  require(action_sequence.rows() >= 1, "rollout: empty action sequence");
  Vector s = state;
  double total = 0.0, discount = 1.0;
  for (Eigen::Index h = 0; h < action_sequence.rows(); ++h) {
    const Vector a = action_sequence.row(h).transpose();
    total += discount * reward(s, a);
    discount *= gamma;
    if (h + 1 < action_sequence.rows()) {
      s = step(s, a);
      if (!s.allFinite()) throw NumericFailure("rollout: non-finite predicted state at step " + std::to_string(h + 1));
    }
  }
  return total;
}

inline double rollout_eval_q(const DynamicsModel& model, const RewardFn& reward, const Vector& state,
                             const Matrix& action_sequence, double gamma) {
  return rollout_return([&](const Vector& s, const Vector& a) { return model.predict(s, a); }, reward, state,
                        action_sequence, gamma);
}

/// Predicted states s_1..s_{H+1} of an autoregressive rollout; (H+1) x state_dim.
inline Matrix rollout_states(const DynamicsModel& model, const Vector& state, const Matrix& action_sequence) {
  Matrix out(action_sequence.rows() + 1, state.size());
  Vector s = state;
  out.row(0) = s.transpose();
  for (Eigen::Index h = 0; h < action_sequence.rows(); ++h) {
    s = model.predict(s, action_sequence.row(h).transpose());
    out.row(h + 1) = s.transpose();
  }
  return out;
}

}  // namespace ramp::baseline
