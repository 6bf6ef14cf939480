#pragma once

// Layered networks viewed as random dynamical systems: x_i = phi(W_i x_{i-1} + b_i).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dnnchaos/errors.hpp"
#include "dnnchaos/rng.hpp"

namespace dnnchaos {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ActivationKind { Tanh, ReLU, Linear };

inline std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Linear: return "linear";
  }
  return "unknown";
}

inline ActivationKind activation_from_string(std::string_view name) {
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "linear") return ActivationKind::Linear;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

inline double activate(ActivationKind kind, double h) {
  switch (kind) {
    case ActivationKind::Tanh: return std::tanh(h);
    case ActivationKind::ReLU: return h > 0.0 ? h : 0.0;
    case ActivationKind::Linear: return h;
  }
  return h;
}

/// Slope of the activation expressed through the post-activation value.
/// ReLU at exactly 0 has slope 0 (the kink and the whole negative half-line
/// both produce 0).
inline double activation_slope_from_output(ActivationKind kind, double x_out) {
  switch (kind) {
    case ActivationKind::Tanh: return 1.0 - x_out * x_out;
    case ActivationKind::ReLU: return x_out > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Linear: return 1.0;
  }
  return 1.0;
}

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace detail

/// One affine map followed by an elementwise activation. Immutable.
class AffineLayer {
 public:
  AffineLayer(Matrix weights, Vector bias, ActivationKind activation)
      : weights_(std::move(weights)), bias_(std::move(bias)), activation_(activation) {
    if (weights_.rows() != weights_.cols()) {
      throw DimensionError("layer weight matrix must be square, got " +
                           std::to_string(weights_.rows()) + "x" +
                           std::to_string(weights_.cols()));
    }
    if (weights_.rows() == 0) throw DimensionError("layer dimension must be positive");
    if (bias_.size() != weights_.rows()) {
      throw DimensionError("bias length " + std::to_string(bias_.size()) +
                           " does not match layer dimension " +
                           std::to_string(weights_.rows()));
    }
    if (!detail::all_finite(weights_) || !detail::all_finite(bias_)) {
      throw ValidationError("layer parameters must be finite");
    }
  }

  static AffineLayer identity(Eigen::Index d, ActivationKind activation = ActivationKind::Linear) {
    return AffineLayer(Matrix::Identity(d, d), Vector::Zero(d), activation);
  }

  const Matrix& weights() const noexcept { return weights_; }
  const Vector& bias() const noexcept { return bias_; }
  ActivationKind activation() const noexcept { return activation_; }
  Eigen::Index dim() const noexcept { return weights_.rows(); }

  friend bool operator==(const AffineLayer& a, const AffineLayer& b) {
    return a.activation_ == b.activation_ && a.weights_ == b.weights_ && a.bias_ == b.bias_;
  }

 private:
  Matrix weights_;
  Vector bias_;
  ActivationKind activation_;
};

/// Ordered sequence of layers sharing one state dimension d (depth D >= 1).
class LayeredNetwork {
 public:
  explicit LayeredNetwork(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("network needs at least one layer");
    const auto d = layers_.front().dim();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].dim() != d) {
        throw DimensionError("layer " + std::to_string(i) + " has dimension " +
                             std::to_string(layers_[i].dim()) + ", expected " +
                             std::to_string(d));
      }
    }
  }

  Eigen::Index dim() const noexcept { return layers_.front().dim(); }
  std::size_t depth() const noexcept { return layers_.size(); }
  const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
  const AffineLayer& layer(std::size_t i) const { return layers_.at(i); }

  friend bool operator==(const LayeredNetwork& a, const LayeredNetwork& b) {
    return a.layers_ == b.layers_;
  }

 private:
  std::vector<AffineLayer> layers_;
};

struct Trajectory {
  std::vector<Vector> states;  // x_0 ... x_D
  std::size_t zero_crossings = 0;  // ReLU pre-activations that were exactly 0
};

struct LayerEvaluation {
  Vector output;
  Vector slopes;  // activation derivative at the pre-activation
  std::size_t zero_crossings = 0;
};

/// Same value as activation_slope_from_output(activate(h)) but without the
/// cancellation in 1 - tanh^2 once tanh rounds to +-1.
inline double activation_slope(ActivationKind kind, double h) {
  switch (kind) {
    case ActivationKind::Tanh: {
      const double c = std::cosh(h);
      return 1.0 / (c * c);
    }
    case ActivationKind::ReLU: return h > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Linear: return 1.0;
  }
  return 1.0;
}

inline LayerEvaluation evaluate_layer(const AffineLayer& layer, const Vector& x) {
  if (x.size() != layer.dim()) {
    throw DimensionError("input length " + std::to_string(x.size()) +
                         " does not match layer dimension " + std::to_string(layer.dim()));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw NumericError("non-finite input at coordinate " + std::to_string(i),
                         static_cast<std::size_t>(i));
    }
  }
  LayerEvaluation out;
  Vector h = layer.weights() * x + layer.bias();
  out.output.resize(h.size());
  out.slopes.resize(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i])) {
      throw NumericError("non-finite pre-activation at coordinate " + std::to_string(i),
                         static_cast<std::size_t>(i));
    }
    if (layer.activation() == ActivationKind::ReLU && h[i] == 0.0) ++out.zero_crossings;
    out.output[i] = activate(layer.activation(), h[i]);
    out.slopes[i] = activation_slope(layer.activation(), h[i]);
  }
  return out;
}

inline Vector apply_layer(const AffineLayer& layer, const Vector& x) {
  return evaluate_layer(layer, x).output;
}

inline Trajectory forward_trajectory(const LayeredNetwork& net, const Vector& x0) {
  if (x0.size() != net.dim()) {
    throw DimensionError("initial state length " + std::to_string(x0.size()) +
                         " does not match network dimension " + std::to_string(net.dim()));
  }
  Trajectory traj;
  traj.states.reserve(net.depth() + 1);
  traj.states.push_back(x0);
  for (std::size_t i = 0; i < net.depth(); ++i) {
    try {
      auto eval = evaluate_layer(net.layer(i), traj.states.back());
      traj.zero_crossings += eval.zero_crossings;
      traj.states.push_back(std::move(eval.output));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " in layer " + std::to_string(i),
                         e.coordinate(), i);
    } catch (const DimensionError& e) {
      throw DimensionError(std::string(e.what()) + " in layer " + std::to_string(i));
    }
  }
  return traj;
}

/// End-to-end map x_0 -> x_D.
inline Vector forward(const LayeredNetwork& net, const Vector& x0) {
  Vector x = x0;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    try {
      x = apply_layer(net.layer(i), x);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " in layer " + std::to_string(i),
                         e.coordinate(), i);
    }
  }
  return x;
}

struct JacobianDiagnostics {
  std::size_t nondifferentiable = 0;  // ReLU kinks hit exactly (from-output overload: any zero output)
};

/// S(x_out) * W, where S is the diagonal of activation slopes written in terms
/// of the post-activation state of this layer.
inline Matrix layer_jacobian(const AffineLayer& layer, const Vector& x_out,
                             JacobianDiagnostics* diagnostics = nullptr) {
  if (x_out.size() != layer.dim()) {
    throw DimensionError("state length " + std::to_string(x_out.size()) +
                         " does not match layer dimension " + std::to_string(layer.dim()));
  }
  Matrix j = layer.weights();
  for (Eigen::Index i = 0; i < x_out.size(); ++i) {
    if (layer.activation() == ActivationKind::ReLU && x_out[i] == 0.0 && diagnostics) {
      ++diagnostics->nondifferentiable;
    }
    j.row(i) *= activation_slope_from_output(layer.activation(), x_out[i]);
  }
  return j;
}

/// S W with S taken from an evaluation of this layer.
inline Matrix layer_jacobian(const AffineLayer& layer, const LayerEvaluation& ev,
                             JacobianDiagnostics* diagnostics = nullptr) {
  if (diagnostics) diagnostics->nondifferentiable += ev.zero_crossings;
  return ev.slopes.asDiagonal() * layer.weights();
}

/// J_D(x_0) = (S_D W_D) ... (S_1 W_1) along the trajectory from x_0.
inline Matrix jacobian_product(const LayeredNetwork& net, const Vector& x0,
                               JacobianDiagnostics* diagnostics = nullptr) {
  if (x0.size() != net.dim()) {
    throw DimensionError("initial state length " + std::to_string(x0.size()) +
                         " does not match network dimension " + std::to_string(net.dim()));
  }
  Matrix j = Matrix::Identity(net.dim(), net.dim());
  Vector x = x0;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    LayerEvaluation ev;
    try {
      ev = evaluate_layer(net.layer(i), x);
    } catch (const NumericError& e) {
      throw NumericError(e.what(), e.coordinate(), i);
    }
    j = layer_jacobian(net.layer(i), ev, diagnostics) * j;
    x = std::move(ev.output);
  }
  return j;
}

enum class VarianceScaling { Raw, OneOverD };

inline std::string_view to_string(VarianceScaling s) {
  return s == VarianceScaling::Raw ? "raw" : "one_over_d";
}

inline VarianceScaling scaling_from_string(std::string_view name) {
  if (name == "raw") return VarianceScaling::Raw;
  if (name == "one_over_d") return VarianceScaling::OneOverD;
  throw ValidationError("unknown variance scaling '" + std::string(name) + "'");
}

/// Parameters of the i.i.d. Gaussian layer ensemble.
struct EnsembleSpec {
  std::size_t d = 1;
  std::size_t depth = 1;
  double entry_variance = 1.0;
  double bias_variance = 0.0;
  std::uint64_t seed = 0;
  VarianceScaling scaling = VarianceScaling::Raw;
  ActivationKind activation = ActivationKind::Tanh;

  double effective_entry_variance() const {
    return scaling == VarianceScaling::OneOverD ? entry_variance / static_cast<double>(d)
                                                : entry_variance;
  }

  void validate() const {
    if (d == 0) throw ValidationError("ensemble dimension must be positive");
    if (depth == 0) throw ValidationError("ensemble depth must be positive");
    if (!(entry_variance >= 0.0) || !std::isfinite(entry_variance)) {
      throw ValidationError("entry variance must be finite and >= 0");
    }
    if (!(bias_variance >= 0.0) || !std::isfinite(bias_variance)) {
      throw ValidationError("bias variance must be finite and >= 0");
    }
  }
};

/// Draws one d x d Gaussian layer. Weights are consumed row-major, then biases;
/// zero bias variance consumes no words for the bias.
inline AffineLayer draw_gaussian_layer(std::size_t d, double entry_variance, double bias_variance,
                                       ActivationKind activation, CounterRng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  const double ws = std::sqrt(entry_variance);
  const double bs = std::sqrt(bias_variance);
  Matrix w(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) w(r, c) = ws * rng.gaussian();
  }
  Vector b = Vector::Zero(n);
  if (bias_variance > 0.0) {
    for (Eigen::Index r = 0; r < n; ++r) b[r] = bs * rng.gaussian();
  }
  return AffineLayer(std::move(w), std::move(b), activation);
}

inline LayeredNetwork generate_gaussian_network(const EnsembleSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed);
  std::vector<AffineLayer> layers;
  layers.reserve(spec.depth);
  for (std::size_t i = 0; i < spec.depth; ++i) {
    layers.push_back(draw_gaussian_layer(spec.d, spec.effective_entry_variance(),
                                         spec.bias_variance, spec.activation, rng));
  }
  return LayeredNetwork(std::move(layers));
}

/// Fresh Gaussian layer per time step, addressable by step index, for
/// random-dynamical-system runs that must not cycle a finite network.
class GaussianLayerStream {
 public:
  explicit GaussianLayerStream(EnsembleSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  AffineLayer operator()(std::size_t step) const {
    CounterRng rng(derive_seed(spec_.seed, {static_cast<std::uint64_t>(step)}));
    return draw_gaussian_layer(spec_.d, spec_.effective_entry_variance(), spec_.bias_variance,
                               spec_.activation, rng);
  }

  const EnsembleSpec& spec() const noexcept { return spec_; }

 private:
  EnsembleSpec spec_;
};

/// Axis-aligned compact box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size()) throw DimensionError("box bounds mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] <= hi[i])) {
        throw ValidationError("box must be compact with lo <= hi");
      }
    }
  }

  Vector clip(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

/// Uniform random point in [lo, hi]^d.
inline Vector random_point(std::size_t d, double lo, double hi, std::uint64_t seed) {
  CounterRng rng(seed);
  Vector x(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo, hi);
  return x;
}

/// Final linear decision sign(w^T x + b) with unit-norm w.
class LinearClassifier {
 public:
  LinearClassifier(Vector w, double b) : w_(std::move(w)), b_(b) {
    if (w_.size() == 0) throw DimensionError("classifier needs a positive dimension");
    if (!w_.allFinite() || !std::isfinite(b_)) throw ValidationError("classifier must be finite");
    if (std::abs(w_.norm() - 1.0) > 1e-12) {
      throw ValidationError("classifier weight must have unit norm");
    }
  }

  /// Normalizes (w, b) jointly, preserving the decision.
  static LinearClassifier normalized(const Vector& w, double b) {
    const double n = w.norm();
    if (!(n > 0.0)) throw ValidationError("classifier weight must be nonzero");
    Vector wn = w / n;
    wn /= wn.norm();
    return LinearClassifier(std::move(wn), b / n);
  }

  const Vector& w() const noexcept { return w_; }
  double b() const noexcept { return b_; }

  double score(const Vector& x) const { return w_.dot(x) + b_; }
  int decide(const Vector& x) const { return score(x) >= 0.0 ? 1 : -1; }

 private:
  Vector w_;
  double b_;
};

}  // namespace dnnchaos
