#pragma once

// Mean-field chaos criterion for Gaussian tanh networks: the nonzero root
// h(alpha) of z = tanh(alpha z), the stationary second moment R, the growth
// factor beta = (1 - R) d sigma^2, and the resulting region predicate.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dnnchaos/core.hpp"
#include "dnnchaos/lyapunov.hpp"
#include "dnnchaos/parallel.hpp"

namespace dnnchaos::meanfield {

/// Nonzero root of z = tanh(alpha z) in (0, 1); 0 when alpha <= 1.
inline double solve_h(double alpha) {
  if (!std::isfinite(alpha)) throw ValidationError("alpha must be finite");
  if (alpha <= 1.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  // g(z) = tanh(alpha z) - z is positive on (0, h) and negative on (h, 1].
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (std::tanh(alpha * mid) - mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

struct SeriesResult {
  double value = 0.5;
  bool converged = false;
  double last_term = 0.0;
  std::vector<double> terms;  // n-th entry: g_n (-f(0.5))^n / n!
};

namespace detail {

/// Taylor coefficients of tanh(alpha (w0 + delta)) in delta, from T' = alpha (1 - T^2).
inline std::vector<double> tanh_taylor(double alpha, double w0, std::size_t order) {
  std::vector<double> t(order + 1, 0.0);
  t[0] = std::tanh(alpha * w0);
  for (std::size_t k = 0; k < order; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i <= k; ++i) sq += t[i] * t[k - i];
    t[k + 1] = alpha * ((k == 0 ? 1.0 : 0.0) - sq) / static_cast<double>(k + 1);
  }
  return t;
}

inline std::vector<double> series_mul(const std::vector<double>& a, const std::vector<double>& b,
                                      std::size_t order) {
  std::vector<double> c(order + 1, 0.0);
  for (std::size_t i = 0; i < a.size() && i <= order; ++i) {
    for (std::size_t j = 0; j < b.size() && i + j <= order; ++j) c[i + j] += a[i] * b[j];
  }
  return c;
}

}  // namespace detail

/// Coefficients [delta^k] of phi(delta) = delta / (f(0.5 + delta) - f(0.5)),
/// with f(w) = tanh(alpha w) - w, up to `order`.
inline std::vector<double> lagrange_phi(double alpha, std::size_t order) {
  const auto t = detail::tanh_taylor(alpha, 0.5, order + 1);
  std::vector<double> c(order + 1);  // (f(0.5+delta) - f(0.5)) / delta
  for (std::size_t k = 0; k <= order; ++k) c[k] = t[k + 1] - (k == 0 ? 1.0 : 0.0);
  if (c[0] == 0.0) throw DegenerateError("f'(0.5) vanishes; inversion series undefined");
  std::vector<double> p(order + 1, 0.0);
  for (std::size_t k = 0; k <= order; ++k) {
    double s = (k == 0 ? 1.0 : 0.0);
    for (std::size_t j = 1; j <= k; ++j) s -= c[j] * p[k - j];
    p[k] = s / c[0];
  }
  return p;
}

/// g_n(alpha) = (n-1)! [delta^{n-1}] phi(delta)^n, for n = 1 .. count.
inline std::vector<double> lagrange_g(double alpha, std::size_t count) {
  std::vector<double> g;
  if (count == 0) return g;
  const std::size_t order = count - 1;
  const auto phi = lagrange_phi(alpha, order);
  std::vector<double> pw = phi;
  double fact = 1.0;  // (n-1)!
  for (std::size_t n = 1; n <= count; ++n) {
    if (n > 1) {
      pw = detail::series_mul(pw, phi, order);
      fact *= static_cast<double>(n - 1);
    }
    g.push_back(fact * pw[n - 1]);
  }
  return g;
}

/// Partial sum 0.5 + sum_{n=1}^{terms} g_n (-f(0.5, alpha))^n / n!.
inline SeriesResult h_lagrange_series(double alpha, std::size_t terms,
                                      double converged_below = 1e-8) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ValidationError("series requires alpha > 1");
  if (terms > 30) throw ValidationError("series supports at most 30 terms");
  SeriesResult res;
  if (terms == 0) return res;
  const double f0 = std::tanh(0.5 * alpha) - 0.5;
  const auto g = lagrange_g(alpha, terms);
  double power = 1.0;
  double fact = 1.0;
  double sum = 0.5;
  for (std::size_t n = 1; n <= terms; ++n) {
    power *= -f0;
    fact *= static_cast<double>(n);
    const double term = g[n - 1] * power / fact;
    res.terms.push_back(term);
    sum += term;
  }
  res.value = sum;
  res.last_term = res.terms.back();
  res.converged = std::isfinite(sum) && std::abs(res.last_term) < converged_below;
  return res;
}

/// Probabilists' Gauss-Hermite rule (weights sum to 1) by Golub-Welsch.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(std::size_t n) {
    if (n == 0) throw ValidationError("quadrature order must be positive");
    const auto m = static_cast<Eigen::Index>(n);
    Matrix J = Matrix::Zero(m, m);
    for (Eigen::Index k = 1; k < m; ++k) {
      J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      nodes.push_back(es.eigenvalues()[i]);
      const double v = es.eigenvectors()(0, i);
      weights.push_back(v * v);
      total += v * v;
    }
    for (auto& w : weights) w /= total;
  }

  /// E[f(Z)], Z standard normal.
  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

inline const GaussHermite& gauss_hermite64() {
  static const GaussHermite rule(64);
  return rule;
}

struct StationaryOptions {
  double residual_tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

/// E[tanh^2(s Z)], Z standard normal, by the trapezoid rule in y = s x. For
/// s <= 1 the integrand tanh^2(y) phi(y/s)/s is integrated directly; for s > 1
/// the complement 1 - E[sech^2(s Z)] is used, whose integrand is localized in
/// |y| < 40. Both integrands are analytic in a strip, so the error decays like
/// exp(-pi^2 / h) and is below 1e-15 at the steps used here.
inline double expected_tanh_sq(double s) {
  s = std::abs(s);
  if (s == 0.0) return 0.0;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto phi = [&](double y) { return inv_sqrt_2pi * std::exp(-0.5 * (y / s) * (y / s)) / s; };
  if (s <= 1.0) {
    const double h = 0.125 * s;
    const auto n = static_cast<int>(std::ceil(10.0 * s / h));
    double sum = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double y = k * h;
      const double t = std::tanh(y);
      sum += t * t * phi(y);
    }
    return 2.0 * h * sum;
  }
  const double h = 0.125;
  const double Y = std::min(40.0, 10.0 * s);
  const auto n = static_cast<int>(std::ceil(Y / h));
  double sum = 0.5 * phi(0.0);  // sech^2(0) = 1, half weight on the symmetric centre
  for (int k = 1; k <= n; ++k) {
    const double y = k * h;
    const double c = 1.0 / std::cosh(y);
    sum += c * c * phi(y);
  }
  return 1.0 - 2.0 * h * sum;
}

/// E[tanh^2(z)] for z ~ N(0, sigma_eff^2 R).
inline double second_moment_map(double sigma_eff, double R) {
  return expected_tanh_sq(sigma_eff * std::sqrt(std::max(R, 0.0)));
}

/// Largest nonnegative fixed point R = E[tanh^2(z)], z ~ N(0, sigma_eff^2 R).
/// The map has slope sigma_eff^2 at 0 and is concave, so for sigma_eff <= 1
/// only R = 0 exists; otherwise the positive root is bracketed and bisected.
inline double stationary_R(double sigma_eff, const StationaryOptions& opt = {}) {
  if (!(sigma_eff > 0.0) || !std::isfinite(sigma_eff)) {
    throw ValidationError("sigma_eff must be positive and finite");
  }
  if (sigma_eff <= 1.0) return 0.0;
  auto G = [&](double R) { return second_moment_map(sigma_eff, R) - R; };
  double hi = 1.0;
  double lo = 0.5;
  std::size_t it = 0;
  while (!(G(lo) > 0.0)) {
    hi = lo;
    lo *= 0.5;
    if (++it > 1100 || lo == 0.0) {
      return 0.0;  // no positive root resolvable in double precision
    }
  }
  for (; it < opt.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (G(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double R = 0.5 * (lo + hi);
  const double residual = std::abs(G(R));
  if (!(residual < opt.residual_tolerance)) {
    throw ConvergenceError("stationary R did not converge (residual " + std::to_string(residual) +
                               ")",
                           residual);
  }
  return R;
}

inline double r_bound(double sigma) {
  const double a = sigma * std::sqrt(2.0 / std::numbers::pi);
  return 4.0 * std::tanh(a * solve_h(a));
}

struct MeanFieldResult {
  double sigma = 0.0;
  std::size_t d = 1;
  double h_value = 0.0;   // h(sigma sqrt(2/pi))
  double R_bound = 0.0;   // 4 tanh(sigma sqrt(2/pi) h(sigma sqrt(2/pi)))
  double R_fixed = 0.0;   // stationary_R(sigma sqrt(d))
  double beta = 0.0;      // (1 - R_bound) d sigma^2
  bool chaotic_predicted = false;  // beta > 1
  double beta_fixed = 0.0;
  bool chaotic_fixed = false;
  // sigma sqrt(d) used inside h, matching the covariance sigma^2 |x|^2 of raw weights
  double h_consistent = 0.0;
  double R_bound_consistent = 0.0;
  double beta_consistent = 0.0;
  bool chaotic_consistent = false;
};

inline MeanFieldResult chaos_condition(double sigma, std::size_t d) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive");
  if (d == 0) throw ValidationError("d must be >= 1");
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const double dd = static_cast<double>(d);
  const double gain = dd * sigma * sigma;
  MeanFieldResult r;
  r.sigma = sigma;
  r.d = d;
  r.h_value = solve_h(sigma * k);
  r.R_bound = 4.0 * std::tanh(sigma * k * r.h_value);
  r.beta = (1.0 - r.R_bound) * gain;
  r.chaotic_predicted = r.beta > 1.0;

  r.R_fixed = stationary_R(sigma * std::sqrt(dd));
  r.beta_fixed = (1.0 - r.R_fixed) * gain;
  r.chaotic_fixed = r.beta_fixed > 1.0;

  const double sc = sigma * std::sqrt(dd) * k;
  r.h_consistent = solve_h(sc);
  r.R_bound_consistent = 4.0 * std::tanh(sc * r.h_consistent);
  r.beta_consistent = (1.0 - r.R_bound_consistent) * gain;
  r.chaotic_consistent = r.beta_consistent > 1.0;
  return r;
}

struct NormConcentrationStats {
  std::size_t d = 0;
  std::vector<double> time_series;  // seed-averaged |x_t|/sqrt(d), t = 1 .. steps
  std::vector<std::vector<double>> per_seed;
  double stationary_mean = 0.0;
  double stationary_variance = 0.0;  // pooled over seeds and the last half of steps
};

/// Tanh dynamics with a fresh Gaussian layer each step from a uniform x0 in [-1,1]^d.
inline NormConcentrationStats norm_concentration(const EnsembleSpec& spec, std::size_t steps,
                                                 std::size_t seeds, std::size_t threads = 1) {
  spec.validate();
  if (steps < 50) throw ValidationError("norm concentration needs at least 50 steps");
  if (seeds == 0) throw ValidationError("need at least one seed");
  if (spec.activation != ActivationKind::Tanh) {
    throw ValidationError("norm concentration is defined for tanh dynamics");
  }
  NormConcentrationStats st;
  st.d = spec.d;
  st.per_seed.assign(seeds, {});
  const double sqrt_d = std::sqrt(static_cast<double>(spec.d));
  parallel_for(seeds, threads, [&](std::size_t s) {
    EnsembleSpec sub = spec;
    sub.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(s)});
    const GaussianLayerStream stream(sub);
    Vector x = random_point(spec.d, -1.0, 1.0, derive_seed(sub.seed, {0x78300ULL, 0}));
    std::vector<double> series;
    series.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      x = apply_layer(stream(t), x);
      series.push_back(x.norm() / sqrt_d);
    }
    st.per_seed[s] = std::move(series);
  });
  st.time_series.assign(steps, 0.0);
  for (const auto& ser : st.per_seed) {
    for (std::size_t t = 0; t < steps; ++t) st.time_series[t] += ser[t] / static_cast<double>(seeds);
  }
  const std::size_t start = steps / 2;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& ser : st.per_seed) {
    for (std::size_t t = start; t < steps; ++t, ++count) sum += ser[t];
  }
  st.stationary_mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& ser : st.per_seed) {
    for (std::size_t t = start; t < steps; ++t) {
      ss += (ser[t] - st.stationary_mean) * (ser[t] - st.stationary_mean);
    }
  }
  st.stationary_variance = count > 1 ? ss / static_cast<double>(count - 1) : 0.0;
  return st;
}

struct SweepCell {
  std::size_t d = 0;
  double sigma2 = 0.0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  double lambda1 = 0.0;
  double entropy = 0.0;
  std::size_t steps = 0;
};

struct SweepRow {
  std::size_t d = 0;
  double sigma2 = 0.0;
  double lambda1_mean = 0.0;
  double lambda1_std = 0.0;
  bool predicate_literal = false;
  bool predicate_consistent = false;
};

struct SweepTable {
  std::vector<SweepCell> cells;  // ordered by (d, sigma2, seed)
  std::vector<SweepRow> rows;    // ordered by (d, sigma2)
};

struct SweepOptions {
  std::uint64_t seed = 0;
  double bias_variance = 0.0;
  VarianceScaling scaling = VarianceScaling::Raw;
  std::size_t threads = 1;
  lyapunov::LyapunovOptions lyapunov = {};
};

/// Lyapunov spectra of the random dynamical system with fresh Gaussian tanh
/// layers each step over a (d, sigma^2) grid.
inline SweepTable ensemble_lyapunov_sweep(const std::vector<std::size_t>& d_list,
                                          const std::vector<double>& sigma2_list,
                                          std::size_t seeds, std::size_t steps,
                                          const SweepOptions& opt = {}) {
  if (d_list.empty() || sigma2_list.empty() || seeds == 0) {
    throw ValidationError("sweep lists must be non-empty");
  }
  SweepTable tab;
  for (std::size_t di = 0; di < d_list.size(); ++di) {
    for (std::size_t si = 0; si < sigma2_list.size(); ++si) {
      for (std::size_t s = 0; s < seeds; ++s) {
        SweepCell c;
        c.d = d_list[di];
        c.sigma2 = sigma2_list[si];
        c.seed_index = s;
        c.seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(c.d),
                                        static_cast<std::uint64_t>(si),
                                        static_cast<std::uint64_t>(s)});
        tab.cells.push_back(c);
      }
    }
  }
  auto lyo = opt.lyapunov;
  lyo.record_stretches = false;
  parallel_for(tab.cells.size(), opt.threads, [&](std::size_t i) {
    SweepCell& c = tab.cells[i];
    EnsembleSpec spec;
    spec.d = c.d;
    spec.depth = 1;
    spec.entry_variance = c.sigma2;
    spec.bias_variance = opt.bias_variance;
    spec.seed = c.seed;
    spec.scaling = opt.scaling;
    spec.activation = ActivationKind::Tanh;
    const GaussianLayerStream stream(spec);
    const Vector x0 = random_point(c.d, -1.0, 1.0, derive_seed(c.seed, {0x78300ULL, 0}));
    const auto rep = lyapunov::benettin_stream(stream, x0, steps, lyo);
    c.lambda1 = rep.spectrum.front();
    c.entropy = rep.entropy;
    c.steps = rep.steps_used;
  });
  for (std::size_t di = 0; di < d_list.size(); ++di) {
    for (std::size_t si = 0; si < sigma2_list.size(); ++si) {
      SweepRow r;
      r.d = d_list[di];
      r.sigma2 = sigma2_list[si];
      const std::size_t base = (di * sigma2_list.size() + si) * seeds;
      double sum = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) sum += tab.cells[base + s].lambda1;
      r.lambda1_mean = sum / static_cast<double>(seeds);
      double ss = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) {
        const double dv = tab.cells[base + s].lambda1 - r.lambda1_mean;
        ss += dv * dv;
      }
      r.lambda1_std = seeds > 1 ? std::sqrt(ss / static_cast<double>(seeds - 1)) : 0.0;
      const auto mf = chaos_condition(std::sqrt(r.sigma2), r.d);
      r.predicate_literal = mf.chaotic_predicted;
      r.predicate_consistent = mf.chaotic_consistent;
      tab.rows.push_back(r);
    }
  }
  return tab;
}

}  // namespace dnnchaos::meanfield
