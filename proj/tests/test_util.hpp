#pragma once

#include "ramp/core.hpp"
#include "ramp/features.hpp"
#include "ramp/qbasis.hpp"

#include <algorithm>
#include <cmath>

namespace ramp::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Q-basis whose psi is exact for gaussian-linear features on unclamped point
/// dynamics: the cumulant is linear in the window, and a one-hidden-layer ReLU
/// net [x; -x] -> [A, -A] represents any linear map.
inline qbasis::QBasisEnsemble exact_point_ensemble(const features::FeatureMap& fm, int horizon, double gamma) {
  const int K = fm.num_features, ds = fm.state_dim, D = ds + ds * horizon;
  const Matrix& G = fm.projection;  // K x 2ds, point action_dim == state_dim
  Matrix A = Matrix::Zero(K, D);
  for (int h = 0; h < horizon; ++h) {
    const double d = std::pow(gamma, h);
    A.leftCols(ds) += d * G.leftCols(ds);
    for (int j = 0; j < h; ++j) A.middleCols(ds + ds * j, ds) += d * G.leftCols(ds);
    A.middleCols(ds + ds * h, ds) += d * G.rightCols(ds);
  }
  tinynet::MlpParams net;
  net.layer_sizes = {D, 2 * D, K};
  net.activation = tinynet::Activation::relu;
  Matrix W1(2 * D, D);
  W1 << Matrix::Identity(D, D), -Matrix::Identity(D, D);
  Matrix W2(K, 2 * D);
  W2 << A, -A;
  net.weights = {W1, W2};
  net.biases = {Vector::Zero(2 * D), Vector::Zero(K)};
  qbasis::QBasisEnsemble ens;
  ens.members = {net};
  ens.horizon = horizon;
  ens.num_features = K;
  ens.state_dim = ds;
  ens.action_dim = ds;
  ens.gamma = gamma;
  ens.input_norm = qbasis::Standardizer::identity(D);
  ens.output_norm = qbasis::Standardizer::identity(K);
  return ens;
}

}  // namespace ramp::testing
