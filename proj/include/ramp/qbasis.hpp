#pragma once

// Ensemble of multi-step Q-basis networks psi(s, a_{1:H}) -> R^K trained by
// Monte-Carlo regression onto discounted feature cumulants.

#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/tinynet.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace ramp::qbasis {

/// Per-dimension affine standardization, frozen once computed.
struct Standardizer {
  Vector mean;
  Vector stddev;

  static Standardizer fit(const Matrix& columns) {
    Standardizer s;
    const double n = static_cast<double>(columns.cols());
    s.mean = columns.rowwise().mean();
    s.stddev = ((columns.colwise() - s.mean).array().square().rowwise().sum() / n).sqrt().matrix();
    for (Eigen::Index i = 0; i < s.stddev.size(); ++i)
      if (!(s.stddev(i) > 1e-8)) s.stddev(i) = 1.0;
    return s;
  }

  static Standardizer identity(int dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

  Matrix normalize(const Matrix& x) const { return stddev.cwiseInverse().asDiagonal() * (x.colwise() - mean); }
  Matrix denormalize(const Matrix& z) const { return (stddev.asDiagonal() * z).colwise() + mean; }
  int dim() const { return static_cast<int>(mean.size()); }
};

struct QBasisConfig {
  std::vector<int> hidden = {512, 512};
  int epochs = 4;
  int batch_size = 128;
  double learning_rate = 3e-4;
  int ensemble_size = 8;
  std::uint64_t seed = 0;
  /// Record one loss row every this many minibatches (per member).
  int log_every = 1;
};

struct LossRecord {
  int member = 0;
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
};

struct QBasisEnsemble {
  std::vector<tinynet::MlpParams> members;
  int horizon = 0;
  int num_features = 0;
  int state_dim = 0;
  int action_dim = 0;
  double gamma = 0.9;
  Standardizer input_norm;
  Standardizer output_norm;
  int epochs_trained = 0;
  std::vector<double> initial_loss;  // per member, full-dataset, before training
  std::vector<double> final_loss;    // per member, full-dataset, after training

  int input_dim() const { return state_dim + horizon * action_dim; }
  int size() const { return static_cast<int>(members.size()); }

  /// Raw-scale psi of member e for a batch of window inputs; K x n.
  Matrix member_outputs(int e, const Matrix& inputs) const {
    if (inputs.rows() != input_dim()) throw InvalidArgument("psi: window input dimension mismatch");
    return output_norm.denormalize(tinynet::forward_batch(members.at(static_cast<std::size_t>(e)),
                                                          input_norm.normalize(inputs)));
  }

  /// Sum_k w_k psi_{e,k} for every member and input, with the output layer folded
  /// against w so the K-wide head is never materialized. Returns E x n.
  Matrix combined(const Vector& w_features, const Matrix& inputs) const {
    if (w_features.size() != num_features) throw InvalidArgument("combined: weight dimension mismatch");
    if (inputs.rows() != input_dim()) throw InvalidArgument("combined: window input dimension mismatch");
    const Matrix z = input_norm.normalize(inputs);
    const Vector scaled_w = output_norm.stddev.cwiseProduct(w_features);
    const double offset = w_features.dot(output_norm.mean);
    Matrix out(size(), inputs.cols());
    for (int e = 0; e < size(); ++e) {
      const auto& net = members[static_cast<std::size_t>(e)];
      const Matrix hidden = tinynet::forward_hidden_batch(net, z);
      const Vector v = net.weights.back().transpose() * scaled_w;
      const double c = offset + scaled_w.dot(net.biases.back());
      out.row(e) = (v.transpose() * hidden).array() + c;
    }
    return out;
  }
};

inline void check_window(const QBasisEnsemble& ens, const Vector& state, const Matrix& action_sequence) {
  if (state.size() != ens.state_dim) throw InvalidArgument("state dimension mismatch");
  if (action_sequence.rows() != ens.horizon)
    throw InvalidArgument("action sequence has " + std::to_string(action_sequence.rows()) + " steps, expected horizon " +
                          std::to_string(ens.horizon));
  if (action_sequence.cols() != ens.action_dim) throw InvalidArgument("action dimension mismatch");
}

/// [s; a_1; ...; a_H] from a state and an (H x action_dim) sequence.
inline Vector make_window(const Vector& state, const Matrix& action_sequence) {
  const Eigen::Index ds = state.size(), da = action_sequence.cols();
  Vector x(ds + action_sequence.rows() * da);
  x.head(ds) = state;
  for (Eigen::Index h = 0; h < action_sequence.rows(); ++h) x.segment(ds + h * da, da) = action_sequence.row(h).transpose();
  return x;
}

/// E x K matrix; row e is member e's cumulant prediction.
inline Matrix predict_psi(const QBasisEnsemble& ens, const Vector& state, const Matrix& action_sequence) {
  check_window(ens, state, action_sequence);
  const Vector x = make_window(state, action_sequence);
  Matrix out(ens.size(), ens.num_features);
  for (int e = 0; e < ens.size(); ++e) out.row(e) = ens.member_outputs(e, x).col(0).transpose();
  return out;
}

namespace detail {

// Mean over samples of ||psi - y||^2 in raw units, from normalized predictions and targets.
inline double raw_loss(const Matrix& pred_norm, const Matrix& target_norm, const Vector& out_std) {
  const Matrix diff = out_std.asDiagonal() * (pred_norm - target_norm);
  return diff.squaredNorm() / static_cast<double>(pred_norm.cols());
}

inline double full_loss(const tinynet::MlpParams& net, const Matrix& x_norm, const Matrix& y_norm,
                        const Vector& out_std) {
  double total = 0.0;
  const Eigen::Index n = x_norm.cols();
  for (Eigen::Index start = 0; start < n; start += 4096) {
    const Eigen::Index len = std::min<Eigen::Index>(4096, n - start);
    const Matrix pred = tinynet::forward_batch(net, x_norm.middleCols(start, len));
    total += raw_loss(pred, y_norm.middleCols(start, len), out_std) * static_cast<double>(len);
  }
  return total / static_cast<double>(n);
}

}  // namespace detail

/// Trains each member independently with Adam minibatches on standardized
/// inputs and targets. Loss rows (one per logged minibatch) are appended to `log` when given.
inline QBasisEnsemble train_qbasis(const features::CumulantDataset& data, const QBasisConfig& cfg,
                                   std::vector<LossRecord>* log = nullptr) {
  require(data.size() > 0, "train_qbasis: empty cumulant dataset");
  require(cfg.ensemble_size >= 1, "train_qbasis: ensemble size must be >= 1");
  require(cfg.batch_size >= 1, "train_qbasis: batch size must be >= 1");
  require(cfg.epochs >= 0, "train_qbasis: epochs must be >= 0");
  require(cfg.learning_rate >= 0.0, "train_qbasis: learning rate must be >= 0");
  for (int h : cfg.hidden) require(h >= 1, "train_qbasis: hidden widths must be positive");

  QBasisEnsemble ens;
  ens.horizon = data.horizon;
  ens.num_features = static_cast<int>(data.targets.rows());
  ens.state_dim = data.state_dim;
  ens.action_dim = data.action_dim;
  ens.gamma = data.gamma;
  ens.input_norm = Standardizer::fit(data.inputs);
  ens.output_norm = Standardizer::fit(data.targets);
  ens.epochs_trained = cfg.epochs;

  const Matrix x_norm = ens.input_norm.normalize(data.inputs);
  const Matrix y_norm = ens.output_norm.normalize(data.targets);
  const Vector& out_std = ens.output_norm.stddev;
  const Eigen::Index n = data.size();

  std::vector<int> sizes{ens.input_dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(ens.num_features);

  for (int e = 0; e < cfg.ensemble_size; ++e) {
    auto net = tinynet::init_mlp(sizes, tinynet::Activation::relu, derive_seed(cfg.seed, 0x0e5b, e));
    auto adam = tinynet::AdamState::for_params(net, cfg.learning_rate);
    Rng shuffle = make_rng(cfg.seed, 0x5f1e, static_cast<std::uint64_t>(e));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    ens.initial_loss.push_back(detail::full_loss(net, x_norm, y_norm, out_std));
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle);
      for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
        const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
        Matrix xb(x_norm.rows(), len), yb(y_norm.rows(), len);
        for (Eigen::Index j = 0; j < len; ++j) {
          xb.col(j) = x_norm.col(order[static_cast<std::size_t>(start + j)]);
          yb.col(j) = y_norm.col(order[static_cast<std::size_t>(start + j)]);
        }
        const auto cache = tinynet::forward_cached(net, xb);
        const Matrix residual = cache.output() - yb;
        const double batch_loss = detail::raw_loss(cache.output(), yb, out_std);
        if (!std::isfinite(batch_loss)) {
          std::ostringstream msg;
          msg << "train_qbasis: non-finite loss (member " << e << ", epoch " << epoch << ", step " << step << ")";
          throw NumericFailure(msg.str());
        }
        const Matrix grad = (2.0 / static_cast<double>(len)) * residual;
        tinynet::adam_step(net, tinynet::backward_cached(net, cache, grad), adam);
        if (log && cfg.log_every > 0 && step % cfg.log_every == 0) log->push_back({e, epoch, step, batch_loss});
        ++step;
      }
    }
    ens.final_loss.push_back(detail::full_loss(net, x_norm, y_norm, out_std));
    ens.members.push_back(std::move(net));
  }
  return ens;
}

/// Dataset loss of each member, in raw units.
inline std::vector<double> evaluate_loss(const QBasisEnsemble& ens, const features::CumulantDataset& data) {
  const Matrix x_norm = ens.input_norm.normalize(data.inputs);
  const Matrix y_norm = ens.output_norm.normalize(data.targets);
  std::vector<double> out;
  for (const auto& m : ens.members) out.push_back(detail::full_loss(m, x_norm, y_norm, ens.output_norm.stddev));
  return out;
}

/// Windows (s_t, a_{t:t+H-1}) with their discounted H-step reward sums.
struct ReturnWindows {
  Matrix inputs;   // input_dim x n
  Vector returns;  // n
};

inline ReturnWindows make_return_windows(const std::vector<envs::Trajectory>& trajectories, int horizon, double gamma) {
  std::vector<Vector> xs;
  std::vector<double> ys;
  for (const auto& t : trajectories) {
    if (!t.rewards) throw InvalidArgument("trajectory carries no rewards");
    for (int s = 0; s + horizon <= t.length(); ++s) {
      xs.push_back(features::window_input(t.states, t.actions, s, horizon));
      double acc = 0.0, disc = 1.0;
      for (int h = 0; h < horizon; ++h, disc *= gamma) acc += disc * (*t.rewards)(s + h);
      ys.push_back(acc);
    }
  }
  ReturnWindows w;
  if (xs.empty()) return w;
  w.inputs.resize(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
  w.returns.resize(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    w.inputs.col(static_cast<Eigen::Index>(i)) = xs[i];
    w.returns(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return w;
}

struct FinetuneConfig {
  double learning_rate = 1e-4;
  int steps = 200;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

/// Gradient steps on (sum_k w_k psi_k + bias cumulant - MC return)^2 for each
/// member; w is held fixed. `weights` has K+1 entries, the last being the bias.
inline QBasisEnsemble finetune_qbasis(const QBasisEnsemble& ens, const Vector& weights,
                                      const std::vector<envs::Trajectory>& online, const FinetuneConfig& cfg) {
  require(weights.size() == ens.num_features + 1, "finetune_qbasis: weights must have K+1 entries");
  require(cfg.learning_rate >= 0.0 && cfg.steps >= 0 && cfg.batch_size >= 1, "finetune_qbasis: bad config");
  for (const auto& t : online)
    if (!t.rewards) throw InvalidArgument("finetune_qbasis: online trajectories must carry rewards");
  const ReturnWindows windows = make_return_windows(online, ens.horizon, ens.gamma);
  require(windows.inputs.cols() > 0, "finetune_qbasis: no complete windows in the online trajectories");

  QBasisEnsemble out = ens;
  const Vector w = weights.head(ens.num_features);
  const double bias_term = weights(ens.num_features) * geometric_sum(ens.gamma, ens.horizon);
  const double offset = w.dot(ens.output_norm.mean) + bias_term;
  const Vector scaled_w = ens.output_norm.stddev.cwiseProduct(w);
  const Matrix x_norm = ens.input_norm.normalize(windows.inputs);
  const Eigen::Index n = x_norm.cols();

  for (int e = 0; e < out.size(); ++e) {
    auto& net = out.members[static_cast<std::size_t>(e)];
    auto adam = tinynet::AdamState::for_params(net, cfg.learning_rate);
    Rng rng = make_rng(cfg.seed, 0xf17e, static_cast<std::uint64_t>(e));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int step = 0; step < cfg.steps; ++step) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n);
      Matrix xb(x_norm.rows(), len);
      Vector yb(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const Eigen::Index idx = len == n ? j : pick(rng);
        xb.col(j) = x_norm.col(idx);
        yb(j) = windows.returns(idx);
      }
      const auto cache = tinynet::forward_cached(net, xb);
      const Vector q = (scaled_w.transpose() * cache.output()).transpose().array() + offset;
      const Vector err = q - yb;
      if (!err.allFinite()) throw NumericFailure("finetune_qbasis: non-finite prediction");
      const Matrix grad = scaled_w * ((2.0 / static_cast<double>(len)) * err.transpose());
      tinynet::adam_step(net, tinynet::backward_cached(net, cache, grad), adam);
    }
  }
  return out;
}

}  // namespace ramp::qbasis
