#pragma once

// Sampling-based planning over H-step action sequences scored by recombined
// Q-bases: random shooting, MPPI, the ensemble disagreement penalty, and the
// bootstrapped multi-step value tail F for planning beyond H.
//
// Candidates are stored as columns of an (H * action_dim) x N matrix, time-major
// within a column: rows [h * action_dim, (h + 1) * action_dim) hold a_h.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"
#include "ramp/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ramp::planner {

enum class Method { random_shooting, mppi };

inline std::string to_string(Method m) { return m == Method::random_shooting ? "random_shooting" : "mppi"; }

inline Method method_from_string(const std::string& s) {
  if (s == "random_shooting") return Method::random_shooting;
  if (s == "mppi") return Method::mppi;
  throw InvalidArgument("unknown planner method '" + s + "'");
}

struct PlannerConfig {
  Method method = Method::random_shooting;
  int num_candidates = 1024;
  int horizon = 16;
  double beta = 1.0;
  double mppi_temperature = 10.0;
  int mppi_iterations = 3;
  int mppi_samples = 256;
  int replan_every = 1;

  void validate() const {
    require(num_candidates >= 1, "planner: N must be >= 1");
    require(horizon >= 1, "planner: horizon must be >= 1");
    require(beta >= 0.0, "planner: beta must be >= 0");
    require(mppi_temperature > 0.0, "planner: MPPI temperature must be positive");
    require(mppi_iterations >= 1 && mppi_samples >= 1, "planner: MPPI iterations and samples must be >= 1");
    require(replan_every >= 1, "planner: replan_every must be >= 1");
  }
};

/// Multi-step value network F(s, a_{1:H}) estimating the value of the state
/// reached after the H actions, with an EMA target copy.
struct ValueTail {
  tinynet::MlpParams online;
  tinynet::MlpParams target;
  double momentum = 0.995;
  double gamma = 0.9;
  int horizon = 16;
  int state_dim = 0;
  int action_dim = 0;
  qbasis::Standardizer input_norm;
  tinynet::AdamState adam;

  int input_dim() const { return state_dim + horizon * action_dim; }

  Vector evaluate(const Matrix& windows) const {
    return tinynet::forward_batch(online, input_norm.normalize(windows)).row(0).transpose();
  }
};

inline ValueTail make_value_tail(int state_dim, int action_dim, int horizon, double gamma,
                                 const std::vector<int>& hidden, double momentum, double learning_rate,
                                 std::uint64_t seed) {
  require(momentum > 0.0 && momentum <= 1.0, "value tail: momentum must lie in (0, 1]");
  ValueTail t;
  t.state_dim = state_dim;
  t.action_dim = action_dim;
  t.horizon = horizon;
  t.gamma = gamma;
  t.momentum = momentum;
  std::vector<int> sizes{t.input_dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  t.online = tinynet::init_mlp(sizes, tinynet::Activation::relu, derive_seed(seed, 0x7a11));
  t.target = t.online;
  t.input_norm = qbasis::Standardizer::identity(t.input_dim());
  t.adam = tinynet::AdamState::for_params(t.online, learning_rate);
  return t;
}

struct CandidateScores {
  Vector score;
  Vector mean;
  Vector variance;  // population variance over members
};

/// mean_e[Q_e] - beta * Var_e[Q_e] (+ gamma^H F) from an E x N matrix of per-member Q values.
inline CandidateScores penalized_scores(const Matrix& member_q, double beta) {
  require(member_q.cols() >= 1, "score_candidates: empty candidate set");
  CandidateScores out;
  out.mean = member_q.colwise().mean().transpose();
  out.variance = (member_q.rowwise() - out.mean.transpose()).array().square().colwise().mean().transpose();
  out.score = out.mean - beta * out.variance;
  return out;
}

inline Matrix window_batch(const Vector& state, const Matrix& candidates) {
  Matrix x(state.size() + candidates.rows(), candidates.cols());
  x.topRows(state.size()) = state.replicate(1, candidates.cols());
  x.bottomRows(candidates.rows()) = candidates;
  return x;
}

inline CandidateScores score_candidates(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state,
                                        const Matrix& candidates, double beta, const ValueTail* tail = nullptr) {
  require(candidates.cols() >= 1, "score_candidates: empty candidate set");
  require(candidates.rows() == static_cast<Eigen::Index>(ens.horizon) * ens.action_dim,
          "score_candidates: candidate length does not match the ensemble horizon");
  require(weights.size() == ens.num_features + 1, "score_candidates: weights must have K+1 entries");
  require(state.size() == ens.state_dim, "score_candidates: state dimension mismatch");
  const Matrix x = window_batch(state, candidates);
  Matrix member_q = ens.combined(weights.head(ens.num_features), x);
  member_q.array() += weights(ens.num_features) * geometric_sum(ens.gamma, ens.horizon);
  CandidateScores out = penalized_scores(member_q, beta);
  if (tail) {
    require(tail->horizon == ens.horizon && tail->input_dim() == ens.input_dim(), "score_candidates: tail shape mismatch");
    out.score += std::pow(ens.gamma, ens.horizon) * tail->evaluate(x);
  }
  return out;
}

/// N i.i.d. uniform sequences in the action box.
inline Matrix sample_uniform_candidates(const envs::EnvSpec& spec, int horizon, int count, Rng& rng) {
  Matrix c(static_cast<Eigen::Index>(horizon) * spec.action_dim, count);
  for (int n = 0; n < count; ++n)
    for (int h = 0; h < horizon; ++h)
      for (int i = 0; i < spec.action_dim; ++i) {
        std::uniform_real_distribution<double> u(spec.action_low(i), spec.action_high(i));
        c(h * spec.action_dim + i, n) = u(rng);
      }
  return c;
}

/// Index of the maximum score; ties go to the lowest index. Throws on non-finite scores.
inline Eigen::Index argmax_first(const Vector& scores) {
  require(scores.size() >= 1, "argmax: empty score vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores(i))) throw NumericFailure("planner: non-finite score for candidate " + std::to_string(i));
    if (scores(i) > scores(best)) best = i;
  }
  return best;
}

inline Matrix unpack_sequence(const Vector& packed, int action_dim) {
  const Eigen::Index horizon = packed.size() / action_dim;
  Matrix seq(horizon, action_dim);
  for (Eigen::Index h = 0; h < horizon; ++h) seq.row(h) = packed.segment(h * action_dim, action_dim).transpose();
  return seq;
}

struct PlanResult {
  Matrix sequence;  // H x action_dim
  Vector first_action;
  Eigen::Index chosen_index = 0;
  double best_score = 0.0;
  double mean_score = 0.0;
  double variance_penalty = 0.0;  // beta * Var of the chosen candidate
};

/// Scorer: maps an (H * action_dim) x N candidate matrix to CandidateScores.
using Scorer = std::function<CandidateScores(const Matrix&)>;

inline PlanResult select_candidate(const Matrix& candidates, const CandidateScores& scores, int action_dim, double beta) {
  PlanResult r;
  r.chosen_index = argmax_first(scores.score);
  r.sequence = unpack_sequence(candidates.col(r.chosen_index), action_dim);
  r.first_action = r.sequence.row(0).transpose();
  r.best_score = scores.score(r.chosen_index);
  r.mean_score = scores.score.mean();
  r.variance_penalty = scores.variance.size() ? beta * scores.variance(r.chosen_index) : 0.0;
  return r;
}

inline PlanResult random_shooting(const Scorer& scorer, const envs::EnvSpec& spec, const PlannerConfig& cfg, Rng& rng) {
  require(cfg.num_candidates >= 1, "random_shooting: N must be >= 1");
  cfg.validate();
  const Matrix candidates = sample_uniform_candidates(spec, cfg.horizon, cfg.num_candidates, rng);
  return select_candidate(candidates, scorer(candidates), spec.action_dim, cfg.beta);
}

inline Scorer ensemble_scorer(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state, double beta,
                              const ValueTail* tail = nullptr) {
  return [&ens, weights, state, beta, tail](const Matrix& c) { return score_candidates(ens, weights, state, c, beta, tail); };
}

inline PlanResult random_shooting(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state,
                                  const envs::EnvSpec& spec, const PlannerConfig& cfg, Rng& rng,
                                  const ValueTail* tail = nullptr) {
  require(cfg.horizon == ens.horizon, "random_shooting: planner horizon must equal the ensemble horizon");
  return random_shooting(ensemble_scorer(ens, weights, state, cfg.beta, tail), spec, cfg, rng);
}

/// Softmax of temperature * score, shifted by the max score. Non-negative, sums to 1.
inline Vector mppi_weights(const Vector& scores, double temperature) {
  require(scores.size() >= 1, "mppi: empty score vector");
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (!std::isfinite(scores(i))) throw NumericFailure("mppi: non-finite score for candidate " + std::to_string(i));
  const double top = scores.maxCoeff();
  Vector u = (temperature * (scores.array() - top)).exp().matrix();
  return u / u.sum();
}

struct GaussianSequence {
  Vector mean;    // H * action_dim
  Vector stddev;  // H * action_dim
};

/// Weighted mean and weighted standard deviation of the samples.
inline GaussianSequence mppi_refit(const Matrix& samples, const Vector& scores, double temperature) {
  const Vector u = mppi_weights(scores, temperature);
  GaussianSequence g;
  g.mean = samples * u;
  g.stddev = ((samples.colwise() - g.mean).array().square().matrix() * u).cwiseSqrt();
  return g;
}

inline PlanResult mppi_plan(const Scorer& scorer, const envs::EnvSpec& spec, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  require(cfg.method == Method::mppi, "mppi_plan: config method must be mppi");
  const int da = spec.action_dim;
  const Eigen::Index len = static_cast<Eigen::Index>(cfg.horizon) * da;
  GaussianSequence dist;
  dist.mean = Vector::Zero(len);
  dist.stddev.resize(len);
  Vector lo(len), hi(len);
  for (int h = 0; h < cfg.horizon; ++h) {
    for (int i = 0; i < da; ++i) {
      lo(h * da + i) = spec.action_low(i);
      hi(h * da + i) = spec.action_high(i);
      dist.mean(h * da + i) = 0.5 * (spec.action_low(i) + spec.action_high(i));
      dist.stddev(h * da + i) = 0.5 * (spec.action_high(i) - spec.action_low(i));
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  CandidateScores last;
  for (int it = 0; it < cfg.mppi_iterations; ++it) {
    Matrix samples(len, cfg.mppi_samples);
    for (int n = 0; n < cfg.mppi_samples; ++n)
      for (Eigen::Index j = 0; j < len; ++j)
        samples(j, n) = std::clamp(dist.mean(j) + dist.stddev(j) * normal(rng), lo(j), hi(j));
    last = scorer(samples);
    dist = mppi_refit(samples, last.score, cfg.mppi_temperature);
  }
  const Vector final_mean = dist.mean.cwiseMax(lo).cwiseMin(hi);
  const CandidateScores final_score = scorer(final_mean);
  PlanResult r;
  r.sequence = unpack_sequence(final_mean, da);
  r.first_action = r.sequence.row(0).transpose();
  r.best_score = final_score.score(0);
  r.mean_score = last.score.mean();
  r.variance_penalty = final_score.variance.size() ? cfg.beta * final_score.variance(0) : 0.0;
  return r;
}

inline PlanResult mppi_plan(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state,
                            const envs::EnvSpec& spec, const PlannerConfig& cfg, Rng& rng,
                            const ValueTail* tail = nullptr) {
  require(cfg.horizon == ens.horizon, "mppi_plan: planner horizon must equal the ensemble horizon");
  return mppi_plan(ensemble_scorer(ens, weights, state, cfg.beta, tail), spec, cfg, rng);
}

inline PlanResult plan(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state,
                       const envs::EnvSpec& spec, const PlannerConfig& cfg, Rng& rng, const ValueTail* tail = nullptr) {
  return cfg.method == Method::mppi ? mppi_plan(ens, weights, state, spec, cfg, rng, tail)
                                    : random_shooting(ens, weights, state, spec, cfg, rng, tail);
}

// ---------------------------------------------------------------------------
// Value tail training

/// (s_t, a_{t:t+H}, r_{t+H}, s_{t+1}): H+1 actions so both F(s_t, a_{t:t+H-1})
/// and the bootstrap F'(s_{t+1}, a_{t+1:t+H}) can be formed.
struct TailWindow {
  Vector state;
  Vector next_state;
  Matrix actions;  // (H+1) x action_dim
  double reward = 0.0;
};

inline std::vector<TailWindow> make_tail_windows(const std::vector<envs::Trajectory>& trajectories, int horizon) {
  std::vector<TailWindow> out;
  for (const auto& t : trajectories) {
    if (!t.rewards) throw InvalidArgument("make_tail_windows: trajectories must carry rewards");
    for (int s = 0; s + horizon < t.length(); ++s) {
      TailWindow w;
      w.state = t.states.row(s).transpose();
      w.next_state = t.states.row(s + 1).transpose();
      w.actions = t.actions.middleRows(s, horizon + 1);
      w.reward = (*t.rewards)(s + horizon);
      out.push_back(std::move(w));
    }
  }
  return out;
}

struct TailBatch {
  Matrix now;   // windows (s_t, a_{t:t+H-1})
  Matrix next;  // windows (s_{t+1}, a_{t+1:t+H})
  Vector reward;
};

inline TailBatch tail_batch(const ValueTail& tail, const std::vector<TailWindow>& windows) {
  TailBatch b;
  const auto n = static_cast<Eigen::Index>(windows.size());
  b.now.resize(tail.input_dim(), n);
  b.next.resize(tail.input_dim(), n);
  b.reward.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TailWindow& w = windows[static_cast<std::size_t>(i)];
    if (w.actions.rows() != tail.horizon + 1)
      throw InvalidArgument("train_value_tail: window lacks the (H+1)-th action");
    if (w.actions.cols() != tail.action_dim || w.state.size() != tail.state_dim || w.next_state.size() != tail.state_dim)
      throw InvalidArgument("train_value_tail: window dimension mismatch");
    b.now.col(i) = qbasis::make_window(w.state, w.actions.topRows(tail.horizon));
    b.next.col(i) = qbasis::make_window(w.next_state, w.actions.bottomRows(tail.horizon));
    b.reward(i) = w.reward;
  }
  return b;
}

/// Mean squared Bellman residual F(x_t) - (r_{t+H} + gamma F'(x_{t+1})) over the windows.
inline double bellman_residual(const ValueTail& tail, const std::vector<TailWindow>& windows) {
  if (windows.empty()) return 0.0;
  const TailBatch b = tail_batch(tail, windows);
  const Vector now = tinynet::forward_batch(tail.online, tail.input_norm.normalize(b.now)).row(0).transpose();
  const Vector next = tinynet::forward_batch(tail.target, tail.input_norm.normalize(b.next)).row(0).transpose();
  return (now - (b.reward + tail.gamma * next)).squaredNorm() / static_cast<double>(windows.size());
}

struct TailTrainConfig {
  int steps = 200;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

/// TD regression of F onto r_{t+H} + gamma F'(s_{t+1}, a_{t+1:t+H}); F' tracks F
/// by exponential moving average after every step.
inline void train_value_tail(ValueTail& tail, const std::vector<TailWindow>& windows, const TailTrainConfig& cfg) {
  require(!windows.empty(), "train_value_tail: no windows");
  require(cfg.steps >= 0 && cfg.batch_size >= 1, "train_value_tail: bad config");
  const TailBatch all = tail_batch(tail, windows);
  if (tail.adam.step_count == 0) {
    // First use: freeze an input standardization from the replay.
    Matrix both(all.now.rows(), all.now.cols() + all.next.cols());
    both << all.now, all.next;
    tail.input_norm = qbasis::Standardizer::fit(both);
  }
  const Matrix now = tail.input_norm.normalize(all.now);
  const Matrix next = tail.input_norm.normalize(all.next);
  const Eigen::Index n = now.cols();
  Rng rng = make_rng(cfg.seed, 0x7a1d, static_cast<std::uint64_t>(tail.adam.step_count));
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (int step = 0; step < cfg.steps; ++step) {
    const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n);
    Matrix xb(now.rows(), len), xn(next.rows(), len);
    Vector rb(len);
    for (Eigen::Index j = 0; j < len; ++j) {
      const Eigen::Index idx = len == n ? j : pick(rng);
      xb.col(j) = now.col(idx);
      xn.col(j) = next.col(idx);
      rb(j) = all.reward(idx);
    }
    const Vector target = rb + tail.gamma * tinynet::forward_batch(tail.target, xn).row(0).transpose();
    const auto cache = tinynet::forward_cached(tail.online, xb);
    const Vector err = cache.output().row(0).transpose() - target;
    if (!err.allFinite()) throw NumericFailure("train_value_tail: non-finite Bellman error");
    const Matrix grad = (2.0 / static_cast<double>(len)) * err.transpose();
    tinynet::adam_step(tail.online, tinynet::backward_cached(tail.online, cache, grad), tail.adam);
    if (tail.momentum < 1.0) {
      for (std::size_t i = 0; i < tail.online.num_layers(); ++i) {
        tail.target.weights[i] = tail.momentum * tail.target.weights[i] + (1.0 - tail.momentum) * tail.online.weights[i];
        tail.target.biases[i] = tail.momentum * tail.target.biases[i] + (1.0 - tail.momentum) * tail.online.biases[i];
      }
    }
  }
}

}  // namespace ramp::planner
