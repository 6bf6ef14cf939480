#pragma once

// Lyapunov spectra of layered networks by tangent-frame evolution with QR
// re-orthonormalization, plus the perturbation-ratio estimator. All logarithms
// are base 2 and exponents are per layer.

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "dnnchaos/core.hpp"

namespace dnnchaos::lyapunov {

inline constexpr double kCollapseStretch = 1e-300;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LyapunovOptions {
  /// Steps excluded from the average. Unset: 10% of the run, at least 10,
  /// never more than half of the run.
  std::optional<std::size_t> burn_in;
  /// Seed of the random orthonormal initial frame. Unset: the identity frame.
  std::optional<std::uint64_t> frame_seed = 0x5EEDF5A3EULL;
  bool record_stretches = true;
};

struct LyapunovReport {
  std::vector<double> spectrum;  // descending
  std::size_t steps_used = 0;
  std::vector<Vector> per_step_log_stretch;
  double entropy = 0.0;
  std::size_t nondifferentiable = 0;
};

inline std::size_t default_burn_in(std::size_t total) {
  const std::size_t b = std::max<std::size_t>(10, total / 10);
  return std::min(b, total / 2);
}

inline double entropy_from_spectrum(const std::vector<double>& spectrum) {
  double s = 0.0;
  for (double l : spectrum) {
    if (l > 0.0) s += l;
  }
  return s;
}

/// Random orthonormal k-frame in R^d (Gaussian matrix, QR, positive diagonal).
inline Matrix random_frame(Eigen::Index d, Eigen::Index k, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix g(d, k);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) g(r, c) = rng.gaussian();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, k);
  const Matrix r = qr.matrixQR();
  for (Eigen::Index c = 0; c < k; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

namespace detail {

inline std::size_t resolve_burn_in(const LyapunovOptions& opt, std::size_t total) {
  if (opt.burn_in) {
    if (*opt.burn_in >= total) throw ValidationError("burn-in must be shorter than the run");
    return *opt.burn_in;
  }
  return default_burn_in(total);
}

inline Matrix initial_frame(Eigen::Index d, Eigen::Index k, const LyapunovOptions& opt) {
  if (opt.frame_seed) return random_frame(d, k, *opt.frame_seed);
  return Matrix::Identity(d, k);
}

}  // namespace detail

/// Core tangent evolution over `total` steps; layer_at(t) yields the layer
/// applied at step t (t = 0, 1, ...). `frame` holds the initial orthonormal
/// columns; its column count is the number of exponents computed.
template <class LayerAt>
LyapunovReport evolve_frame(const Vector& x0, std::size_t total, LayerAt&& layer_at, Matrix frame,
                            const LyapunovOptions& opt) {
  if (total == 0) throw ValidationError("Lyapunov run needs at least one step");
  const Eigen::Index d = x0.size();
  const Eigen::Index k = frame.cols();
  if (frame.rows() != d || k == 0 || k > d) throw DimensionError("initial frame has wrong shape");
  const std::size_t burn = detail::resolve_burn_in(opt, total);

  LyapunovReport rep;
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  std::vector<bool> collapsed(static_cast<std::size_t>(k), false);
  JacobianDiagnostics diag;
  Vector x = x0;
  if (opt.record_stretches) rep.per_step_log_stretch.reserve(total);

  for (std::size_t t = 0; t < total; ++t) {
    const AffineLayer& layer = layer_at(t);
    LayerEvaluation ev;
    try {
      ev = evaluate_layer(layer, x);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(t), e.coordinate(),
                         t);
    }
    const Matrix moved = layer_jacobian(layer, ev, &diag) * frame;
    x = std::move(ev.output);
    Vector stretch(k);
    if (k == 1) {
      const double n = moved.col(0).norm();
      stretch[0] = n;
      frame = n > 0.0 ? Matrix(moved / n) : frame;
    } else {
      Eigen::HouseholderQR<Matrix> qr(moved);
      Matrix q = qr.householderQ() * Matrix::Identity(d, k);
      const Matrix& r = qr.matrixQR();
      for (Eigen::Index c = 0; c < k; ++c) {
        stretch[c] = std::abs(r(c, c));
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
      }
      frame = std::move(q);
    }
    Vector logs(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!(stretch[c] >= kCollapseStretch)) {
        logs[c] = kNegInf;
        if (t >= burn) collapsed[ci] = true;
      } else {
        logs[c] = std::log2(stretch[c]);
      }
      if (t >= burn && !collapsed[ci]) sums[ci] += logs[c];
    }
    if (opt.record_stretches) rep.per_step_log_stretch.push_back(std::move(logs));
  }

  rep.steps_used = total - burn;
  rep.spectrum.resize(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < rep.spectrum.size(); ++c) {
    rep.spectrum[c] = collapsed[c] ? kNegInf : sums[c] / static_cast<double>(rep.steps_used);
  }
  std::sort(rep.spectrum.begin(), rep.spectrum.end(), std::greater<>());
  rep.entropy = entropy_from_spectrum(rep.spectrum);
  rep.nondifferentiable = diag.nondifferentiable;
  return rep;
}

/// Full spectrum with the network applied cyclically `repeat` times.
inline LyapunovReport benettin_spectrum(const LayeredNetwork& net, const Vector& x0,
                                        std::size_t repeat, const LyapunovOptions& opt = {},
                                        std::optional<Matrix> frame = std::nullopt) {
  if (repeat == 0) throw ValidationError("repeat must be >= 1");
  if (x0.size() != net.dim()) throw DimensionError("initial state does not match network");
  const std::size_t D = net.depth();
  Matrix f = frame ? *frame : detail::initial_frame(net.dim(), net.dim(), opt);
  return evolve_frame(
      x0, D * repeat, [&](std::size_t t) -> const AffineLayer& { return net.layer(t % D); },
      std::move(f), opt);
}

/// Full spectrum along a stream of freshly drawn layers.
inline LyapunovReport benettin_stream(const GaussianLayerStream& stream, const Vector& x0,
                                      std::size_t steps, const LyapunovOptions& opt = {}) {
  const auto d = static_cast<Eigen::Index>(stream.spec().d);
  if (x0.size() != d) throw DimensionError("initial state does not match stream dimension");
  AffineLayer current = stream(0);
  std::size_t current_step = 0;
  return evolve_frame(
      x0, steps,
      [&](std::size_t t) -> const AffineLayer& {
        if (t != current_step) {
          current = stream(t);
          current_step = t;
        }
        return current;
      },
      detail::initial_frame(d, d, opt), opt);
}

/// Largest exponent from a single renormalized tangent vector.
inline double top_exponent(const LayeredNetwork& net, const Vector& x0, std::size_t repeat,
                           const LyapunovOptions& opt = {},
                           std::optional<Vector> direction = std::nullopt) {
  if (repeat == 0) throw ValidationError("repeat must be >= 1");
  if (x0.size() != net.dim()) throw DimensionError("initial state does not match network");
  Matrix f;
  if (direction) {
    if (direction->size() != net.dim() || !(direction->norm() > 0.0)) {
      throw DimensionError("tangent direction must be a nonzero d-vector");
    }
    f = *direction / direction->norm();
  } else {
    f = detail::initial_frame(net.dim(), net.dim(), opt).col(0);
  }
  LyapunovOptions o = opt;
  o.record_stretches = false;
  const std::size_t D = net.depth();
  return evolve_frame(
             x0, D * repeat,
             [&](std::size_t t) -> const AffineLayer& { return net.layer(t % D); }, std::move(f),
             o)
      .spectrum.front();
}

struct PerturbationEstimate {
  std::vector<double> d_values;
  double max_abs = 0.0;
  double log_normalized = kNegInf;  // (1/D) log2(max_abs)
  double perturbation_scale = 0.0;  // absolute magnitude used
};

/// For each trial: random direction of magnitude scale*|x0| (absolute `scale`
/// when x0 = 0), ratio of output displacement to input displacement.
inline PerturbationEstimate procedure1_estimate(const LayeredNetwork& net, const Vector& x0,
                                                std::size_t trials, double scale = 1e-4,
                                                std::uint64_t seed = 0) {
  if (trials == 0) throw ValidationError("trials must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("scale must be positive");
  if (x0.size() != net.dim()) throw DimensionError("initial state does not match network");
  const double x0n = x0.norm();
  const double magnitude = x0n > 0.0 ? scale * x0n : scale;

  PerturbationEstimate est;
  est.perturbation_scale = magnitude;
  const Vector y = forward(net, x0);
  CounterRng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Vector dir(x0.size());
    double n = 0.0;
    do {
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.gaussian();
      n = dir.norm();
    } while (!(n > 0.0));
    const Vector delta = dir * (magnitude / n);
    const Vector yt = forward(net, x0 + delta);
    const double dt = (y - yt).norm() / delta.norm();
    est.d_values.push_back(dt);
    est.max_abs = std::max(est.max_abs, std::abs(dt));
  }
  est.log_normalized = est.max_abs > 0.0
                           ? std::log2(est.max_abs) / static_cast<double>(net.depth())
                           : kNegInf;
  return est;
}

}  // namespace dnnchaos::lyapunov
