#pragma once

// Hand-built 2-D networks with provably large tangent growth: a tanh network
// that pins |x_t| = r while stretching a designed tangent direction by A each
// layer, and a ReLU network whose state angle has a gradient growing like a^T.

#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dnnchaos/core.hpp"

namespace dnnchaos::constructions {

struct TanhChaosConfig {
  double A = 4.0;
  double r = 0.5;
  Vector x0;  // |x0| = r; defaults to (r, 0)
  Vector u0;  // independent of x0; defaults to (0, 1)
  std::size_t steps = 100;
  std::size_t circle_samples = 64;
  double min_det = 1e-9;
  double max_condition = 1e12;

  static TanhChaosConfig make(double A, double r, std::size_t steps) {
    TanhChaosConfig c;
    c.A = A;
    c.r = r;
    c.steps = steps;
    c.x0 = Vector(2);
    c.x0 << r, 0.0;
    c.u0 = Vector(2);
    c.u0 << 0.0, 1.0;
    return c;
  }

  void validate() const {
    if (!(A > 1.0) || !std::isfinite(A)) throw ValidationError("A must be > 1");
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("r must lie in (0, 1)");
    if (x0.size() != 2 || u0.size() != 2) throw DimensionError("construction is 2-dimensional");
    if (std::abs(x0.norm() - r) > 1e-12) throw ValidationError("|x0| must equal r");
    if (circle_samples == 0) throw ValidationError("need at least one circle sample");
    const double det = u0[0] * x0[1] - u0[1] * x0[0];
    if (!(std::abs(det) > min_det)) {
      throw DegenerateError("u0 and x0 are linearly dependent");
    }
  }
};

struct TanhChaosStep {
  AffineLayer layer;
  Vector x;           // honest state tanh(W x_{t-1})
  Vector u;           // J_t u_{t-1} with |u_{t-1}| normalized to 1
  double log2_stretch = 0.0;  // log2 |u_t| for a unit u_{t-1}
  double condition = 0.0;     // condition number of B_t
};

namespace detail {

inline double det2(const Vector& a, const Vector& b) { return a[0] * b[1] - a[1] * b[0]; }

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// One layer: W u_hat = A u_hat and W x_{t-1} = atanh(x_t) for a target x_t on
/// the circle of radius r chosen to keep the next frame (u_t, x_t) well conditioned.
inline TanhChaosStep tanh_chaos_step(const Vector& x_prev, const Vector& u_prev,
                                     const TanhChaosConfig& cfg) {
  if (x_prev.size() != 2 || u_prev.size() != 2) throw DimensionError("construction is 2-D");
  const double un = u_prev.norm();
  if (!(un > 0.0)) throw DegenerateError("tangent vector vanished");
  const Vector uh = u_prev / un;

  Matrix B(2, 2);
  B.col(0) = uh;
  B.col(1) = x_prev;
  const double cond = detail::condition_number(B);
  if (!(cond <= cfg.max_condition)) {
    throw DegenerateError("frame (u, x) has condition number " + std::to_string(cond));
  }

  // Next tangent direction is diag(1 - x_t^2) u_hat up to the factor A.
  Vector best_target;
  double best_score = -1.0;
  for (std::size_t k = 0; k < cfg.circle_samples; ++k) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(k) /
                      static_cast<double>(cfg.circle_samples);
    Vector xt(2);
    xt << cfg.r * std::cos(th), cfg.r * std::sin(th);
    Vector s = uh;
    for (int i = 0; i < 2; ++i) s[i] *= 1.0 - xt[i] * xt[i];
    const double score = std::abs(detail::det2(s, xt)) / (s.norm() * cfg.r);
    if (score > cfg.min_det && score > best_score) {
      best_score = score;
      best_target = xt;
    }
  }
  if (best_score < 0.0) {
    throw DegenerateError("no admissible target among " + std::to_string(cfg.circle_samples) +
                          " circle samples");
  }
  for (int i = 0; i < 2; ++i) {
    if (std::abs(best_target[i]) >= 1.0 - 1e-12) throw Error("target component too close to 1");
  }

  Matrix C(2, 2);
  C.col(0) = cfg.A * uh;
  C.col(1) << std::atanh(best_target[0]), std::atanh(best_target[1]);
  Matrix W = C * B.inverse();

  AffineLayer layer(std::move(W), Vector::Zero(2), ActivationKind::Tanh);
  Vector x = apply_layer(layer, x_prev);
  if ((x - best_target).norm() > 1e-10) {
    throw DegenerateError("layer missed its target by " +
                          std::to_string((x - best_target).norm()));
  }
  Vector u = layer_jacobian(layer, x) * uh;
  const double ratio = u.norm();
  return TanhChaosStep{std::move(layer), std::move(x), std::move(u), std::log2(ratio), cond};
}

struct TanhChaosRun {
  LayeredNetwork network;
  std::vector<Vector> states;       // x_0 .. x_steps
  std::vector<double> growth_log;   // log2(|u_t|/|u_0|)/t for t = 1 .. steps
  std::vector<double> conditions;
};

inline TanhChaosRun tanh_chaos_run(const TanhChaosConfig& cfg) {
  cfg.validate();
  if (cfg.steps == 0) throw ValidationError("steps must be >= 1");
  std::vector<AffineLayer> layers;
  std::vector<Vector> states{cfg.x0};
  std::vector<double> growth;
  std::vector<double> conds;
  Vector u = cfg.u0;
  double total = 0.0;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    auto st = tanh_chaos_step(states.back(), u, cfg);
    total += st.log2_stretch;
    growth.push_back(total / static_cast<double>(t));
    conds.push_back(st.condition);
    layers.push_back(std::move(st.layer));
    states.push_back(std::move(st.x));
    u = std::move(st.u);
  }
  return TanhChaosRun{LayeredNetwork(std::move(layers)), std::move(states), std::move(growth),
                      std::move(conds)};
}

struct ReluAngleConfig {
  double a = 2.0;
  double x0 = 1.0;
  std::size_t t0 = 32;   // reset period
  std::size_t T = 40;    // number of layers
  double c_bound = 2.0;  // |W22| must stay below this
  double w22 = 1.0;      // W22 on ordinary layers
  double b2 = 0.0;       // b2 on ordinary layers
  double level = 1.0;    // b2 on the layer after a reset

  void validate() const {
    if (!(a > 1.0) || !std::isfinite(a)) throw ValidationError("a must be > 1");
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw ValidationError("x0 must be > 0");
    if (t0 < 2) throw ValidationError("reset period t0 must be >= 2");
    if (T == 0) throw ValidationError("T must be >= 1");
    if (!(std::abs(w22) < c_bound)) throw ValidationError("|W22| must be below the C bound");
  }

  bool is_reset(std::size_t t) const { return t == 1 || (t > 0 && t % t0 == 0); }
};

/// Layers t = 1 .. T: x1 -> relu(a x1 + (1 - a) x0) keeps x1 = x0 (an unstable
/// fixed point), x2 ignores x1 and is zeroed at reset layers.
inline LayeredNetwork relu_angle_network(const ReluAngleConfig& cfg) {
  cfg.validate();
  std::vector<AffineLayer> layers;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    Matrix W = Matrix::Zero(2, 2);
    Vector b(2);
    W(0, 0) = cfg.a;
    b[0] = (1.0 - cfg.a) * cfg.x0;
    if (cfg.is_reset(t)) {
      W(1, 1) = 0.0;
      b[1] = -1.0;
    } else if (cfg.is_reset(t - 1)) {
      W(1, 1) = 0.0;
      b[1] = cfg.level;
    } else {
      W(1, 1) = cfg.w22;
      b[1] = cfg.b2;
    }
    layers.emplace_back(std::move(W), std::move(b), ActivationKind::ReLU);
  }
  return LayeredNetwork(std::move(layers));
}

namespace detail {

inline double angle_after(const LayeredNetwork& net, const Vector& x0, std::size_t T) {
  Vector x = x0;
  for (std::size_t t = 0; t < T; ++t) {
    x = apply_layer(net.layer(t), x);
    if (x[0] == 0.0) {
      throw DegenerateError("trajectory reached x1 = 0 at layer " + std::to_string(t + 1) +
                            "; angle undefined");
    }
  }
  return std::atan(x[1] / x[0]);
}

}  // namespace detail

/// d theta(T) / d x1(0), theta = arctan(x2 / x1), by central differences. The
/// step starts at 1e-7 |x1(0)| and is halved until two successive estimates
/// agree to 1e-6 relative, so large a^T does not push the perturbation off
/// the linear piece of the ReLU map.
inline double angle_gradient(const LayeredNetwork& net, const Vector& x0, std::size_t T) {
  if (x0.size() != 2 || net.dim() != 2) throw DimensionError("angle gradient is 2-D");
  if (T == 0 || T > net.depth()) throw ValidationError("T must lie in [1, depth]");
  if (x0[0] == 0.0) throw DegenerateError("x1(0) = 0; angle undefined");
  detail::angle_after(net, x0, T);
  auto estimate = [&](double h) {
    Vector p = x0, m = x0;
    p[0] += h;
    m[0] -= h;
    return (detail::angle_after(net, p, T) - detail::angle_after(net, m, T)) / (p[0] - m[0]);
  };
  double h = 1e-7 * std::abs(x0[0]);
  bool have_prev = false;
  double prev = 0.0;
  for (int k = 0; k < 80; ++k, h *= 0.5) {
    double cur;
    try {
      cur = estimate(h);
    } catch (const DegenerateError&) {
      have_prev = false;  // perturbed orbit left the positive half-plane
      continue;
    }
    if (have_prev && std::abs(cur - prev) <= 1e-6 * std::abs(cur)) return cur;
    prev = cur;
    have_prev = true;
  }
  throw ConvergenceError("angle gradient finite differences did not settle", std::abs(prev));
}

}  // namespace dnnchaos::constructions
