#pragma once

// Test-time reward regression onto random features: batch ridge, recursive
// least squares, and recombination of the Q-bases with the fitted weights.
//
// Feature rows carry K+1 entries: the K random features followed by a constant
// 1 (bias). The bias weight multiplies the analytic cumulant of the constant
// feature, (1 - gamma^H) / (1 - gamma), when Q-values are formed.

#include "ramp/core.hpp"
#include "ramp/qbasis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <string>

namespace ramp::rewardfit {

struct RewardWeights {
  Vector w;  // K+1, last entry is the bias coefficient
  double lambda = 0.0;
  std::int64_t n_samples_seen = 0;

  Vector features() const { return w.head(w.size() - 1); }
  double bias() const { return w(w.size() - 1); }
};

/// Appends the constant bias column to an n x K feature matrix.
inline Matrix append_bias(const Matrix& phi_rows) {
  Matrix out(phi_rows.rows(), phi_rows.cols() + 1);
  out.leftCols(phi_rows.cols()) = phi_rows;
  out.col(phi_rows.cols()).setOnes();
  return out;
}

inline Vector append_bias(const Vector& phi) {
  Vector out(phi.size() + 1);
  out << phi, 1.0;
  return out;
}

/// argmin (1/n) sum (r_i - phi_i^T w)^2 + lambda ||w||^2, i.e.
/// w = (Phi^T Phi + n lambda I)^{-1} Phi^T r, via Cholesky.
inline RewardWeights ridge_fit(const Matrix& features, const Vector& rewards, double lambda) {
  const Eigen::Index n = features.rows(), p = features.cols();
  require(n >= 1, "ridge_fit: need at least one sample");
  require(rewards.size() == n, "ridge_fit: reward count does not match feature rows");
  require(lambda >= 0.0 && std::isfinite(lambda), "ridge_fit: lambda must be finite and >= 0");
  require(features.allFinite() && rewards.allFinite(), "ridge_fit: non-finite inputs");

  const Vector rhs = features.transpose() * rewards;
  Matrix gram = features.transpose() * features;
  gram.diagonal().array() += static_cast<double>(n) * lambda;

  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(features);
    if (qr.rank() < p)
      throw RankDeficiency("ridge_fit: feature matrix has rank " + std::to_string(qr.rank()) + " < " +
                           std::to_string(p) + " columns with lambda = 0 (rank deficiency " +
                           std::to_string(p - qr.rank()) + ")");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficiency("ridge_fit: normal equations are not positive definite");
  Vector w = llt.solve(rhs);
  // One step of iterative refinement keeps the normal-equation residual small.
  const Vector resid = rhs - gram * w;
  w += llt.solve(resid);
  RewardWeights out;
  out.w = std::move(w);
  out.lambda = lambda;
  out.n_samples_seen = n;
  return out;
}

inline double normal_equation_residual(const Matrix& features, const Vector& rewards, double lambda, const Vector& w) {
  Matrix gram = features.transpose() * features;
  gram.diagonal().array() += static_cast<double>(features.rows()) * lambda;
  return (gram * w - features.transpose() * rewards).norm();
}

/// Recursive least squares with P_0 = I / lambda. After n updates, w equals the
/// batch ridge solution with regularizer matrix lambda * I, which is
/// ridge_fit(..., lambda / n) under the averaged objective.
struct RlsState {
  Matrix P;
  Vector b;
  Vector w;
  double lambda = 1.0;
  std::int64_t n = 0;

  int dim() const { return static_cast<int>(w.size()); }

  /// The ridge_fit lambda whose solution this state currently equals.
  double equivalent_ridge_lambda() const { return n > 0 ? lambda / static_cast<double>(n) : lambda; }

  RewardWeights snapshot() const { return {w, equivalent_ridge_lambda(), n}; }
};

/// State over K features plus the bias entry.
inline RlsState rls_init(int num_features, double lambda) {
  require(num_features >= 0, "rls_init: K must be >= 0");
  require(lambda > 0.0 && std::isfinite(lambda), "rls_init: lambda must be positive");
  const int p = num_features + 1;
  RlsState s;
  s.P = Matrix::Identity(p, p) / lambda;
  s.b = Vector::Zero(p);
  s.w = Vector::Zero(p);
  s.lambda = lambda;
  return s;
}

/// Sherman-Morrison rank-1 update with one (phi_row, reward) sample.
inline void rls_update(RlsState& s, const Vector& phi_row, double reward) {
  require(phi_row.size() == s.dim(), "rls_update: feature row must have K+1 entries");
  require(phi_row.allFinite() && std::isfinite(reward), "rls_update: non-finite input");
  const Vector p_phi = s.P * phi_row;
  const double denom = 1.0 + phi_row.dot(p_phi);
  const Vector gain = p_phi / denom;
  s.w += gain * (reward - phi_row.dot(s.w));
  s.P.noalias() -= gain * p_phi.transpose();
  s.b += reward * phi_row;
  s.n += 1;
  if (s.n % 256 == 0) {
    // Re-symmetrize to stop round-off from drifting P off the SPD cone.
    Matrix sym = 0.5 * (s.P + s.P.transpose());
    s.P = std::move(sym);
  }
}

/// The state reached by feeding every row of `features` through rls_update,
/// computed in one batch solve.
inline RlsState rls_from_batch(const Matrix& features, const Vector& rewards, double lambda) {
  require(features.rows() == rewards.size(), "rls_from_batch: row count mismatch");
  require(lambda > 0.0, "rls_from_batch: lambda must be positive");
  RlsState s;
  const Eigen::Index p = features.cols();
  Matrix gram = Matrix::Identity(p, p) * lambda;
  gram.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericFailure("rls_from_batch: Gram matrix is not positive definite");
  s.P = llt.solve(Matrix::Identity(p, p));
  s.b = features.transpose() * rewards;
  s.w = llt.solve(s.b);
  s.lambda = lambda;
  s.n = features.rows();
  return s;
}

/// Mean over members of sum_k w_k psi_k + w_bias * (1 - gamma^H) / (1 - gamma).
inline double q_estimate(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Vector& state,
                         const Matrix& action_sequence) {
  qbasis::check_window(ens, state, action_sequence);
  require(weights.size() == ens.num_features + 1, "q_estimate: weights must have K+1 entries");
  const Matrix per_member = ens.combined(weights.head(ens.num_features), qbasis::make_window(state, action_sequence));
  return per_member.mean() + weights(ens.num_features) * geometric_sum(ens.gamma, ens.horizon);
}

/// q_estimate for a batch of window inputs (columns).
inline Vector q_estimate_batch(const qbasis::QBasisEnsemble& ens, const Vector& weights, const Matrix& windows) {
  require(weights.size() == ens.num_features + 1, "q_estimate: weights must have K+1 entries");
  const Matrix per_member = ens.combined(weights.head(ens.num_features), windows);
  return (per_member.colwise().mean().transpose().array() + weights(ens.num_features) * geometric_sum(ens.gamma, ens.horizon))
      .matrix();
}

struct RegressionDiagnostics {
  double mse = 0.0;
  double r2 = 0.0;
};

inline RegressionDiagnostics regression_diagnostics(const Matrix& features, const Vector& rewards, const Vector& w) {
  RegressionDiagnostics d;
  if (rewards.size() == 0) return d;
  const Vector pred = features * w;
  const double sse = (pred - rewards).squaredNorm();
  const double sst = (rewards.array() - rewards.mean()).square().sum();
  d.mse = sse / static_cast<double>(rewards.size());
  d.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  return d;
}

}  // namespace ramp::rewardfit
