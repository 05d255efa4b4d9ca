#pragma once

// Dense multilayer perceptrons with exact backprop and Adam.
//
// Samples are stored column-wise: a batch of n inputs is an (input_dim x n)
// matrix. Hidden layers share one activation; the output layer is affine.

#include "ramp/core.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ramp::tinynet {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

struct MlpParams {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<Matrix> weights;  // weights[i]: layer_sizes[i+1] x layer_sizes[i]
  std::vector<Vector> biases;   // biases[i]: layer_sizes[i+1]

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
      n += static_cast<std::size_t>(layer_sizes[i + 1]) * (layer_sizes[i] + 1);
    return n;
  }

  bool operator==(const MlpParams& o) const {
    if (layer_sizes != o.layer_sizes || activation != o.activation) return false;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] != o.weights[i] || biases[i] != o.biases[i]) return false;
    return true;
  }
};

/// Gradients with the same layout as MlpParams, plus d(loss)/d(input).
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;

  static MlpGradients zeros_like(const MlpParams& p) {
    MlpGradients g;
    for (std::size_t i = 0; i < p.num_layers(); ++i) {
      g.weights.push_back(Matrix::Zero(p.weights[i].rows(), p.weights[i].cols()));
      g.biases.push_back(Vector::Zero(p.biases[i].size()));
    }
    return g;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
    return true;
  }
};

inline void validate_layer_sizes(const std::vector<int>& sizes) {
  require(sizes.size() >= 2, "layer_sizes needs at least input and output sizes");
  for (int s : sizes) require(s >= 1, "layer_sizes entries must be positive");
}

/// Fan-in scaled Gaussian weights (He for relu, Xavier/LeCun for tanh), zero biases.
inline MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation activation, std::uint64_t seed) {
  validate_layer_sizes(layer_sizes);
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activation = activation;
  Rng rng(mix_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int fan_in = layer_sizes[i];
    const double scale = std::sqrt((activation == Activation::relu ? 2.0 : 1.0) / fan_in);
    Matrix w(layer_sizes[i + 1], fan_in);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * normal(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector::Zero(layer_sizes[i + 1]));
  }
  return p;
}

namespace detail {

inline void apply_activation(Activation a, Matrix& z) {
  if (a == Activation::relu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}

// Multiplies the incoming gradient by the activation derivative, expressed in
// terms of the post-activation values.
inline void activation_backward(Activation a, const Matrix& post, Matrix& grad) {
  if (a == Activation::relu)
    grad = (post.array() > 0.0).select(grad, 0.0);
  else
    grad.array() *= 1.0 - post.array().square();
}

}  // namespace detail

/// Post-activation values of every layer, activations[0] being the input.
struct ForwardCache {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

inline ForwardCache forward_cached(const MlpParams& p, const Matrix& inputs) {
  if (inputs.rows() != p.input_dim())
    throw InvalidArgument("forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(p.input_dim()));
  ForwardCache cache;
  cache.activations.reserve(p.num_layers() + 1);
  cache.activations.push_back(inputs);
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    Matrix z = p.weights[i] * cache.activations.back();
    z.colwise() += p.biases[i];
    if (i + 1 < p.num_layers()) detail::apply_activation(p.activation, z);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

inline Matrix forward_batch(const MlpParams& p, const Matrix& inputs) {
  if (inputs.rows() != p.input_dim())
    throw InvalidArgument("forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(p.input_dim()));
  Matrix a = inputs;
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    Matrix z = p.weights[i] * a;
    z.colwise() += p.biases[i];
    if (i + 1 < p.num_layers()) detail::apply_activation(p.activation, z);
    a = std::move(z);
  }
  return a;
}

inline Vector forward(const MlpParams& p, const Vector& input) {
  Matrix out = forward_batch(p, input);
  return out.col(0);
}

/// Activations of the last hidden layer (the input itself for a single-layer net).
inline Matrix forward_hidden_batch(const MlpParams& p, const Matrix& inputs) {
  require(inputs.rows() == p.input_dim(), "forward_hidden: input dimension mismatch");
  Matrix a = inputs;
  for (std::size_t i = 0; i + 1 < p.num_layers(); ++i) {
    Matrix z = p.weights[i] * a;
    z.colwise() += p.biases[i];
    detail::apply_activation(p.activation, z);
    a = std::move(z);
  }
  return a;
}

/// Backpropagates output_gradients (output_dim x n); parameter gradients are summed over the batch.
inline MlpGradients backward_cached(const MlpParams& p, const ForwardCache& cache, const Matrix& output_gradients) {
  if (output_gradients.rows() != p.output_dim() || output_gradients.cols() != cache.output().cols())
    throw InvalidArgument("backward: output gradient shape mismatch");
  MlpGradients g;
  g.weights.resize(p.num_layers());
  g.biases.resize(p.num_layers());
  Matrix delta = output_gradients;
  for (std::size_t li = p.num_layers(); li-- > 0;) {
    if (li + 1 < p.num_layers()) detail::activation_backward(p.activation, cache.activations[li + 1], delta);
    g.weights[li].noalias() = delta * cache.activations[li].transpose();
    g.biases[li] = delta.rowwise().sum();
    Matrix prev = p.weights[li].transpose() * delta;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

inline MlpGradients backward(const MlpParams& p, const Vector& input, const Vector& output_gradient) {
  if (input.size() != p.input_dim()) throw InvalidArgument("backward: input dimension mismatch");
  if (output_gradient.size() != p.output_dim()) throw InvalidArgument("backward: output gradient dimension mismatch");
  ForwardCache cache = forward_cached(p, input);
  return backward_cached(p, cache, output_gradient);
}

struct AdamState {
  std::int64_t step_count = 0;
  MlpGradients first_moment;
  MlpGradients second_moment;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& p, double lr) {
    AdamState s;
    s.first_moment = MlpGradients::zeros_like(p);
    s.second_moment = MlpGradients::zeros_like(p);
    s.learning_rate = lr;
    return s;
  }
};

/// One bias-corrected Adam update. Throws NumericFailure (leaving params and
/// state untouched) if any gradient entry is non-finite.
inline void adam_step(MlpParams& p, const MlpGradients& g, AdamState& s) {
  if (g.weights.size() != p.num_layers() || g.biases.size() != p.num_layers())
    throw InvalidArgument("adam_step: gradient layer count mismatch");
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    if (g.weights[i].rows() != p.weights[i].rows() || g.weights[i].cols() != p.weights[i].cols() ||
        g.biases[i].size() != p.biases[i].size())
      throw InvalidArgument("adam_step: gradient shape mismatch at layer " + std::to_string(i));
  }
  if (!g.all_finite()) throw NumericFailure("adam_step: non-finite gradient");
  if (s.first_moment.weights.size() != p.num_layers()) {
    s.first_moment = MlpGradients::zeros_like(p);
    s.second_moment = MlpGradients::zeros_like(p);
  }
  s.step_count += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseAbs2();
    param.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    update(p.weights[i], g.weights[i], s.first_moment.weights[i], s.second_moment.weights[i]);
    update(p.biases[i], g.biases[i], s.first_moment.biases[i], s.second_moment.biases[i]);
  }
}

/// Layer order; per layer the weights row-major, then the biases.
inline std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    const Matrix& w = p.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
    for (Eigen::Index r = 0; r < p.biases[i].size(); ++r) out.push_back(p.biases[i](r));
  }
  return out;
}

inline MlpParams unflatten(const std::vector<int>& layer_sizes, Activation activation, std::span<const double> flat) {
  validate_layer_sizes(layer_sizes);
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activation = activation;
  if (flat.size() != p.parameter_count())
    throw InvalidArgument("unflatten: expected " + std::to_string(p.parameter_count()) + " values, got " +
                          std::to_string(flat.size()));
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    Matrix w(layer_sizes[i + 1], layer_sizes[i]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    Vector b(layer_sizes[i + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = flat[k++];
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

}  // namespace ramp::tinynet
