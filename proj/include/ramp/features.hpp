#pragma once

// Random feature maps phi(s, a) and their discounted H-step accumulations
// (cumulants), the self-supervised regression targets for the Q-bases.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/tinynet.hpp"

#include <string>
#include <vector>

namespace ramp::features {

enum class FeatureKind { random_mlp, gaussian_linear, polynomial };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::random_mlp: return "random_mlp";
    case FeatureKind::gaussian_linear: return "gaussian_linear";
    case FeatureKind::polynomial: return "polynomial";
  }
  return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "random_mlp" || s == "random") return FeatureKind::random_mlp;
  if (s == "gaussian_linear" || s == "gaussian") return FeatureKind::gaussian_linear;
  if (s == "polynomial") return FeatureKind::polynomial;
  throw InvalidArgument("unsupported feature kind '" + s + "'");
}

/// Hidden width of every random_mlp feature network.
inline constexpr int kRandomFeatureWidth = 32;

inline int polynomial_feature_count(int input_dim) { return 1 + input_dim + input_dim * (input_dim + 1) / 2; }

struct FeatureMap {
  FeatureKind kind = FeatureKind::random_mlp;
  int num_features = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::uint64_t seed = 0;
  /// Per-input divisor applied to [s; a] before random_mlp networks.
  Vector input_scale;
  std::vector<tinynet::MlpParams> nets;  // random_mlp
  Matrix projection;                     // gaussian_linear: K x (state_dim + action_dim)

  int input_dim() const { return state_dim + action_dim; }

  /// phi for a batch of concatenated [s; a] columns; returns K x n.
  Matrix phi_batch(const Matrix& inputs) const {
    if (inputs.rows() != input_dim()) throw InvalidArgument("phi: input dimension mismatch");
    const Eigen::Index n = inputs.cols();
    switch (kind) {
      case FeatureKind::gaussian_linear: return projection * inputs;
      case FeatureKind::polynomial: {
        const int d = input_dim();
        Matrix out(num_features, n);
        for (Eigen::Index c = 0; c < n; ++c) {
          int k = 0;
          out(k++, c) = 1.0;
          for (int i = 0; i < d; ++i) out(k++, c) = inputs(i, c);
          for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) out(k++, c) = inputs(i, c) * inputs(j, c);
        }
        return out;
      }
      case FeatureKind::random_mlp: {
        ensure_stacked();
        const Matrix scaled = input_scale.cwiseInverse().asDiagonal() * inputs;
        Matrix h1 = stacked_w1_ * scaled;
        h1.colwise() += stacked_b1_;
        h1 = h1.cwiseMax(0.0);
        Matrix out(num_features, n);
        Matrix h2(kRandomFeatureWidth, n);
        for (int k = 0; k < num_features; ++k) {
          const auto& net = nets[static_cast<std::size_t>(k)];
          h2.noalias() = net.weights[1] * h1.middleRows(static_cast<Eigen::Index>(k) * kRandomFeatureWidth,
                                                        kRandomFeatureWidth);
          h2.colwise() += net.biases[1];
          h2 = h2.cwiseMax(0.0);
          out.row(k) = ((net.weights[2] * h2).array() + net.biases[2](0)).tanh().matrix();
        }
        return out;
      }
    }
    throw InvalidArgument("bad feature kind");
  }

  Vector phi(const Vector& state, const Vector& action) const {
    if (state.size() != state_dim || action.size() != action_dim)
      throw InvalidArgument("phi: state/action dimension mismatch");
    Vector x(input_dim());
    x << state, action;
    return phi_batch(x).col(0);
  }

  /// Drops cached stacked weights; call after mutating `nets`.
  void invalidate_cache() const { stacked_w1_.resize(0, 0); }

 private:
  void ensure_stacked() const {
    if (stacked_w1_.rows() == static_cast<Eigen::Index>(num_features) * kRandomFeatureWidth) return;
    stacked_w1_.resize(static_cast<Eigen::Index>(num_features) * kRandomFeatureWidth, input_dim());
    stacked_b1_.resize(static_cast<Eigen::Index>(num_features) * kRandomFeatureWidth);
    for (int k = 0; k < num_features; ++k) {
      stacked_w1_.middleRows(static_cast<Eigen::Index>(k) * kRandomFeatureWidth, kRandomFeatureWidth) =
          nets[static_cast<std::size_t>(k)].weights[0];
      stacked_b1_.segment(static_cast<Eigen::Index>(k) * kRandomFeatureWidth, kRandomFeatureWidth) =
          nets[static_cast<std::size_t>(k)].biases[0];
    }
  }

  mutable Matrix stacked_w1_;
  mutable Vector stacked_b1_;
};

/// random_mlp networks: fan-in Gaussian weights with unit-variance Gaussian
/// biases, [s; a] -> 32 -> 32 -> 1, tanh on the output so |phi| <= 1.
inline FeatureMap make_feature_map(FeatureKind kind, int num_features, int state_dim, int action_dim,
                                   std::uint64_t seed, const Vector& input_scale = Vector()) {
  require(state_dim >= 1 && action_dim >= 1, "make_feature_map: dimensions must be positive");
  FeatureMap fm;
  fm.kind = kind;
  fm.state_dim = state_dim;
  fm.action_dim = action_dim;
  fm.seed = seed;
  const int d = state_dim + action_dim;
  fm.input_scale = input_scale.size() == 0 ? Vector::Ones(d) : input_scale;
  require(fm.input_scale.size() == d && (fm.input_scale.array() > 0.0).all(),
          "make_feature_map: input_scale must be positive with one entry per input");
  switch (kind) {
    case FeatureKind::polynomial:
      fm.num_features = polynomial_feature_count(d);
      break;
    case FeatureKind::gaussian_linear: {
      require(num_features >= 1, "make_feature_map: K must be >= 1");
      fm.num_features = num_features;
      Rng rng = make_rng(seed, 0x6a55);
      std::normal_distribution<double> normal(0.0, 1.0);
      fm.projection.resize(num_features, d);
      for (Eigen::Index r = 0; r < fm.projection.rows(); ++r)
        for (Eigen::Index c = 0; c < d; ++c) fm.projection(r, c) = normal(rng);
      break;
    }
    case FeatureKind::random_mlp: {
      require(num_features >= 1, "make_feature_map: K must be >= 1");
      fm.num_features = num_features;
      fm.nets.reserve(static_cast<std::size_t>(num_features));
      for (int k = 0; k < num_features; ++k) {
        const std::uint64_t net_seed = derive_seed(seed, 0xfea7, static_cast<std::uint64_t>(k));
        auto net = tinynet::init_mlp({d, kRandomFeatureWidth, kRandomFeatureWidth, 1}, tinynet::Activation::relu,
                                     net_seed);
        Rng rng = make_rng(net_seed, 0xb1a5);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& b : net.biases)
          for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(rng);
        fm.nets.push_back(std::move(net));
      }
      break;
    }
  }
  return fm;
}

/// Concatenation [s_t; a_t; ...; a_{t+H-1}] read from time-major state/action rows.
inline Vector window_input(const Matrix& states, const Matrix& actions, int start, int horizon) {
  const int ds = static_cast<int>(states.cols()), da = static_cast<int>(actions.cols());
  Vector x(ds + horizon * da);
  x.head(ds) = states.row(start).transpose();
  for (int h = 0; h < horizon; ++h) x.segment(ds + h * da, da) = actions.row(start + h).transpose();
  return x;
}

/// Sum_{h=0}^{H-1} gamma^h phi(s_{start+h}, a_{start+h}) for any phi callable returning a Vector.
template <typename PhiFn>
Vector discounted_sum(PhiFn&& phi, const Matrix& states, const Matrix& actions, int start, double gamma, int horizon) {
  require(horizon >= 1, "discounted_feature_sum: horizon must be positive");
  require(start >= 0, "discounted_feature_sum: negative start");
  if (start + horizon > actions.rows() || start + horizon > states.rows())
    throw InvalidArgument("discounted_feature_sum: segment shorter than the horizon");
  Vector acc;
  double discount = 1.0;
  for (int h = 0; h < horizon; ++h) {
    Vector f = phi(Vector(states.row(start + h).transpose()), Vector(actions.row(start + h).transpose()));
    if (h == 0)
      acc = f;
    else
      acc += discount * f;
    discount *= gamma;
  }
  return acc;
}

inline Vector discounted_feature_sum(const Matrix& states, const Matrix& actions, int start, const FeatureMap& map,
                                     double gamma, int horizon) {
  return discounted_sum([&](const Vector& s, const Vector& a) { return map.phi(s, a); }, states, actions, start, gamma,
                        horizon);
}

struct CumulantDataset {
  int horizon = 0;
  double gamma = 0.9;
  int state_dim = 0;
  int action_dim = 0;
  Matrix inputs;   // (state_dim + H * action_dim) x n
  Matrix targets;  // K x n
  std::vector<std::pair<int, int>> origin;  // (trajectory, start) per entry

  Eigen::Index size() const { return inputs.cols(); }
};

/// Every window t = 0, stride, 2*stride, ... with t + H <= episode length, from every trajectory.
inline CumulantDataset build_cumulant_dataset(const envs::OfflineDataset& dataset, const FeatureMap& map, double gamma,
                                              int horizon, int stride) {
  require(stride >= 1, "build_cumulant_dataset: stride must be >= 1");
  require(horizon >= 1, "build_cumulant_dataset: horizon must be >= 1");
  require(gamma >= 0.0 && gamma < 1.0, "build_cumulant_dataset: gamma must lie in [0, 1)");
  require(!dataset.trajectories.empty(), "build_cumulant_dataset: empty dataset");
  require(map.state_dim == dataset.spec.state_dim && map.action_dim == dataset.spec.action_dim,
          "build_cumulant_dataset: feature map dimensions do not match the dataset");
  CumulantDataset out;
  out.horizon = horizon;
  out.gamma = gamma;
  out.state_dim = dataset.spec.state_dim;
  out.action_dim = dataset.spec.action_dim;
  std::size_t total = 0;
  for (const auto& t : dataset.trajectories) {
    require(t.length() >= horizon, "build_cumulant_dataset: trajectory shorter than the horizon");
    total += static_cast<std::size_t>((t.length() - horizon) / stride + 1);
  }
  const int in_dim = out.state_dim + horizon * out.action_dim;
  out.inputs.resize(in_dim, static_cast<Eigen::Index>(total));
  out.targets.resize(map.num_features, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (std::size_t m = 0; m < dataset.trajectories.size(); ++m) {
    const auto& traj = dataset.trajectories[m];
    const int len = traj.length();
    Matrix sa(out.state_dim + out.action_dim, len);
    sa.topRows(out.state_dim) = traj.states.topRows(len).transpose();
    sa.bottomRows(out.action_dim) = traj.actions.transpose();
    const Matrix phis = map.phi_batch(sa);  // K x len
    for (int t = 0; t + horizon <= len; t += stride) {
      out.inputs.col(col) = window_input(traj.states, traj.actions, t, horizon);
      auto y = out.targets.col(col);
      y = phis.col(t);
      double discount = gamma;
      for (int h = 1; h < horizon; ++h, discount *= gamma) y += discount * phis.col(t + h);
      out.origin.emplace_back(static_cast<int>(m), t);
      ++col;
    }
  }
  return out;
}

}  // namespace ramp::features
