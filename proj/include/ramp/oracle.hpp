#pragma once

// Ground truth: Monte-Carlo truncated Q by simulation, exact tabular
// multi-step Q-functions, and brute-force verification of H-step generalized
// policy improvement on small deterministic MDPs.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ramp::oracle {

/// Deterministic simulation of the action sequence; sum_h gamma^{h-1} r_h.
inline double mc_truncated_q(const envs::Env& env, const envs::RewardTask& task, const Vector& state,
                             const Matrix& action_sequence, double gamma) {
  Vector s = state;
  double total = 0.0, discount = 1.0;
  for (Eigen::Index h = 0; h < action_sequence.rows(); ++h) {
    const Vector a = action_sequence.row(h).transpose();
    total += discount * env.reward(task, s, a);
    discount *= gamma;
    if (h + 1 < action_sequence.rows()) s = env.step(s, a);
  }
  return total;
}

/// A (state, H-action sequence) pair on which Q-estimates are compared.
struct EvalWindow {
  Vector state;
  Matrix actions;  // H x action_dim
};

inline std::vector<EvalWindow> windows_from_trajectories(const std::vector<envs::Trajectory>& trajs, int horizon,
                                                         int stride = 1) {
  std::vector<EvalWindow> out;
  for (const auto& t : trajs)
    for (int s = 0; s + horizon <= t.length(); s += stride)
      out.push_back({t.states.row(s).transpose(), t.actions.middleRows(s, horizon)});
  return out;
}

using QFn = std::function<double(const Vector&, const Matrix&)>;

/// Mean |method(s, a_{1:H}) - mc_truncated_q(s, a_{1:H})| over the windows.
inline double q_error_metric(const QFn& method, const envs::Env& env, const envs::RewardTask& task,
                             const std::vector<EvalWindow>& windows, double gamma) {
  require(!windows.empty(), "q_error_metric: empty window set");
  double total = 0.0;
  for (const auto& w : windows) total += std::abs(method(w.state, w.actions) - mc_truncated_q(env, task, w.state, w.actions, gamma));
  return total / static_cast<double>(windows.size());
}

// ---------------------------------------------------------------------------
// Tabular MDPs

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<int> next_state;  // n_states * n_actions, row-major by state
  std::vector<double> reward;   // n_states * n_actions
  double gamma = 0.9;

  int next(int s, int a) const { return next_state[static_cast<std::size_t>(s * n_actions + a)]; }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s * n_actions + a)]; }

  void validate() const {
    require(n_states >= 1 && n_actions >= 1, "TabularMdp: need at least one state and action");
    require(next_state.size() == static_cast<std::size_t>(n_states * n_actions) &&
                reward.size() == next_state.size(),
            "TabularMdp: table size mismatch");
    for (int v : next_state) require(v >= 0 && v < n_states, "TabularMdp: next_state out of range");
    require(gamma >= 0.0 && gamma < 1.0, "TabularMdp: gamma must lie in [0, 1)");
  }
};

using Policy = std::vector<int>;  // state -> action

inline constexpr double kValueIterationTolerance = 1e-10;

/// V_pi by value iteration until the sup-norm residual drops below 1e-10.
inline std::vector<double> evaluate_policy(const TabularMdp& mdp, const Policy& pi) {
  require(pi.size() == static_cast<std::size_t>(mdp.n_states), "evaluate_policy: policy must cover every state");
  std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0), nv(v.size());
  for (int iter = 0; iter < 100000; ++iter) {
    double resid = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      const int a = pi[static_cast<std::size_t>(s)];
      nv[static_cast<std::size_t>(s)] = mdp.r(s, a) + mdp.gamma * v[static_cast<std::size_t>(mdp.next(s, a))];
      resid = std::max(resid, std::abs(nv[static_cast<std::size_t>(s)] - v[static_cast<std::size_t>(s)]));
    }
    v.swap(nv);
    if (resid < kValueIterationTolerance) break;
  }
  return v;
}

/// Executes the open-loop sequence, then follows pi: sum_h gamma^{h-1} r_h + gamma^H V_pi(s_{H+1}).
inline double tabular_multi_step_q(const TabularMdp& mdp, const std::vector<double>& v_pi, int state,
                                   const std::vector<int>& sequence) {
  double total = 0.0, discount = 1.0;
  int s = state;
  for (int a : sequence) {
    total += discount * mdp.r(s, a);
    discount *= mdp.gamma;
    s = mdp.next(s, a);
  }
  return total + discount * v_pi[static_cast<std::size_t>(s)];
}

inline double tabular_multi_step_q(const TabularMdp& mdp, const Policy& pi, int state, const std::vector<int>& sequence) {
  return tabular_multi_step_q(mdp, evaluate_policy(mdp, pi), state, sequence);
}

inline constexpr long kMaxEnumeratedSequences = 100;

/// All |A|^H action sequences in lexicographic order.
inline std::vector<std::vector<int>> enumerate_sequences(int n_actions, int horizon) {
  long count = 1;
  for (int h = 0; h < horizon; ++h) {
    count *= n_actions;
    if (count > kMaxEnumeratedSequences)
      throw ResourceError("enumeration budget exceeded: |A|^H > " + std::to_string(kMaxEnumeratedSequences));
  }
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> seq(static_cast<std::size_t>(horizon), 0);
  for (long i = 0; i < count; ++i) {
    out.push_back(seq);
    for (int h = horizon - 1; h >= 0; --h) {
      if (++seq[static_cast<std::size_t>(h)] < n_actions) break;
      seq[static_cast<std::size_t>(h)] = 0;
    }
  }
  return out;
}

struct GpiReport {
  bool holds = true;
  /// min over states of V_{pi'_H}(s) - max_{a_{1:H}} max_pi Q_pi(s, a_{1:H})
  double first_gap = std::numeric_limits<double>::infinity();
  /// min over states of max_{a_{1:H}} max_pi Q_pi(s, a_{1:H}) - max_a max_pi Q_pi(s, a)
  double second_gap = std::numeric_limits<double>::infinity();
  double worst_gap() const { return std::min(first_gap, second_gap); }
  int trials = 1;
  int violations = 0;
};

/// Slack below which an inequality counts as violated (value-iteration noise).
inline constexpr double kGpiTolerance = 1e-8;

inline GpiReport gpi_check(const TabularMdp& mdp, const std::vector<Policy>& policies, int horizon) {
  mdp.validate();
  require(!policies.empty(), "gpi_check: policy set is empty");
  require(horizon >= 1, "gpi_check: horizon must be >= 1");
  const auto sequences = enumerate_sequences(mdp.n_actions, horizon);
  std::vector<std::vector<double>> values;
  for (const auto& pi : policies) values.push_back(evaluate_policy(mdp, pi));

  const auto ns = static_cast<std::size_t>(mdp.n_states);
  std::vector<double> best_multi(ns), best_single(ns);
  std::vector<std::size_t> greedy(ns);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t q = 0; q < sequences.size(); ++q)
      for (const auto& v : values) {
        const double val = tabular_multi_step_q(mdp, v, s, sequences[q]);
        if (val > best) {
          best = val;
          arg = q;
        }
      }
    best_multi[static_cast<std::size_t>(s)] = best;
    greedy[static_cast<std::size_t>(s)] = arg;
    double single = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a)
      for (const auto& v : values) single = std::max(single, tabular_multi_step_q(mdp, v, s, {a}));
    best_single[static_cast<std::size_t>(s)] = single;
  }

  // V_{pi'_H}: fixed point of V(s) = R_H(s, pi'_H(s)) + gamma^H V(s_{H+1}).
  std::vector<double> seg_return(ns);
  std::vector<int> landing(ns);
  double gamma_h = std::pow(mdp.gamma, horizon);
  for (int s = 0; s < mdp.n_states; ++s) {
    double total = 0.0, discount = 1.0;
    int cur = s;
    for (int a : sequences[greedy[static_cast<std::size_t>(s)]]) {
      total += discount * mdp.r(cur, a);
      discount *= mdp.gamma;
      cur = mdp.next(cur, a);
    }
    seg_return[static_cast<std::size_t>(s)] = total;
    landing[static_cast<std::size_t>(s)] = cur;
  }
  std::vector<double> v(ns, 0.0), nv(ns);
  for (int iter = 0; iter < 1000000; ++iter) {
    double resid = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      nv[s] = seg_return[s] + gamma_h * v[static_cast<std::size_t>(landing[s])];
      resid = std::max(resid, std::abs(nv[s] - v[s]));
    }
    v.swap(nv);
    if (resid < kValueIterationTolerance) break;
  }

  GpiReport report;
  for (std::size_t s = 0; s < ns; ++s) {
    report.first_gap = std::min(report.first_gap, v[s] - best_multi[s]);
    report.second_gap = std::min(report.second_gap, best_multi[s] - best_single[s]);
  }
  report.holds = report.first_gap >= -kGpiTolerance && report.second_gap >= -kGpiTolerance;
  report.violations = report.holds ? 0 : 1;
  return report;
}

inline TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  std::uniform_int_distribution<int> next(0, n_states - 1);
  std::uniform_real_distribution<double> rew(-1.0, 1.0);
  for (int i = 0; i < n_states * n_actions; ++i) {
    m.next_state.push_back(next(rng));
    m.reward.push_back(rew(rng));
  }
  return m;
}

inline Policy random_policy(int n_states, int n_actions, Rng& rng) {
  std::uniform_int_distribution<int> act(0, n_actions - 1);
  Policy p(static_cast<std::size_t>(n_states));
  for (auto& a : p) a = act(rng);
  return p;
}

/// Optimal deterministic policy by value iteration on the Bellman optimality operator.
inline Policy optimal_policy(const TabularMdp& mdp) {
  std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
  Policy pi(static_cast<std::size_t>(mdp.n_states), 0);
  for (int iter = 0; iter < 100000; ++iter) {
    double resid = 0.0;
    std::vector<double> nv(v.size());
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double q = mdp.r(s, a) + mdp.gamma * v[static_cast<std::size_t>(mdp.next(s, a))];
        if (q > best) {
          best = q;
          pi[static_cast<std::size_t>(s)] = a;
        }
      }
      nv[static_cast<std::size_t>(s)] = best;
      resid = std::max(resid, std::abs(best - v[static_cast<std::size_t>(s)]));
    }
    v.swap(nv);
    if (resid < kValueIterationTolerance) break;
  }
  return pi;
}

struct GpiTrialsConfig {
  int trials = 200;
  std::uint64_t seed = 0;
  int max_states = 6;
  int n_actions = 3;
  int max_horizon = 3;
  int n_policies = 3;
  double gamma = 0.9;
};

/// gpi_check over random deterministic MDPs (2..max_states states, H in 1..max_horizon).
inline GpiReport gpi_trials(const GpiTrialsConfig& cfg) {
  require(cfg.trials >= 0, "gpi_trials: trials must be >= 0");
  GpiReport agg;
  agg.trials = cfg.trials;
  for (int t = 0; t < cfg.trials; ++t) {
    Rng rng = make_rng(cfg.seed, 0x6b1, static_cast<std::uint64_t>(t));
    std::uniform_int_distribution<int> ns(2, cfg.max_states), hs(1, cfg.max_horizon);
    const int n_states = ns(rng);
    const int horizon = hs(rng);
    const TabularMdp mdp = random_mdp(n_states, cfg.n_actions, cfg.gamma, rng);
    std::vector<Policy> policies;
    for (int p = 0; p < cfg.n_policies; ++p) policies.push_back(random_policy(n_states, cfg.n_actions, rng));
    const GpiReport r = gpi_check(mdp, policies, horizon);
    agg.first_gap = std::min(agg.first_gap, r.first_gap);
    agg.second_gap = std::min(agg.second_gap, r.second_gap);
    if (!r.holds) agg.violations += 1;
  }
  agg.holds = agg.violations == 0;
  return agg;
}

}  // namespace ramp::oracle
