#pragma once

// Brute-force orbit counting on discretized compact boxes.
//
// Conventions: an (n, eps)-spanning set covers every grid orbit with an open
// ball (orbit distance < eps); an (n, eps)-separated set has all pairwise orbit
// distances >= eps. The orbit distance over horizon n is the maximum Euclidean
// distance over times 0 .. n-1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "dnnchaos/core.hpp"
#include "dnnchaos/parallel.hpp"

namespace dnnchaos::entropy {

inline constexpr std::size_t kMaxGridPoints = 1000000;

/// One step of a (possibly time-dependent) system: x_{t+1} = map(x_t, t).
using StepMap = std::function<Vector(const Vector&, std::size_t)>;

/// Layers applied cyclically; optionally each state is clipped back into `box`.
inline StepMap network_map(LayeredNetwork net, std::optional<Box> clip_box = std::nullopt) {
  return [net = std::move(net), clip_box = std::move(clip_box)](const Vector& x, std::size_t t) {
    Vector y = apply_layer(net.layer(t % net.depth()), x);
    return clip_box ? clip_box->clip(y) : y;
  };
}

inline std::vector<std::size_t> grid_shape(const Box& box, double grid_step) {
  box.validate();
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
    throw ValidationError("grid step must be positive");
  }
  std::vector<std::size_t> shape;
  double total = 1.0;
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    const double span = (box.hi[i] - box.lo[i]) / grid_step;
    const auto k = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    shape.push_back(k);
    total *= static_cast<double>(k);
  }
  if (total > static_cast<double>(kMaxGridPoints)) {
    throw RefusedError("grid of " + std::to_string(static_cast<long double>(total)) +
                       " points exceeds the limit of " + std::to_string(kMaxGridPoints));
  }
  return shape;
}

/// Grid points lo + k*step in lexicographic order (last coordinate fastest).
inline std::vector<Vector> grid_points(const Box& box, double grid_step) {
  const auto shape = grid_shape(box, grid_step);
  std::size_t total = 1;
  for (auto k : shape) total *= k;
  std::vector<Vector> pts;
  pts.reserve(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t p = 0; p < total; ++p) {
    Vector x(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
      x[i] = box.lo[i] + static_cast<double>(idx[static_cast<std::size_t>(i)]) * grid_step;
    }
    pts.push_back(std::move(x));
    for (std::size_t i = shape.size(); i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  return pts;
}

/// Orbits of a point set up to a maximal horizon; horizons n <= n_max reuse prefixes.
class OrbitSet {
 public:
  OrbitSet(const StepMap& map, std::vector<Vector> initial, std::size_t n_max,
           std::size_t threads = 1)
      : n_max_(n_max), initial_(std::move(initial)) {
    if (n_max_ == 0) throw ValidationError("horizon must be >= 1");
    if (initial_.empty()) throw ValidationError("orbit set needs at least one point");
    d_ = static_cast<std::size_t>(initial_.front().size());
    states_.assign(initial_.size() * n_max_ * d_, 0.0);
    parallel_for(initial_.size(), threads, [&](std::size_t p) {
      Vector x = initial_[p];
      for (std::size_t t = 0; t < n_max_; ++t) {
        if (static_cast<std::size_t>(x.size()) != d_) throw DimensionError("orbit dimension changed");
        std::copy(x.data(), x.data() + d_, states_.data() + (p * n_max_ + t) * d_);
        if (t + 1 < n_max_) x = map(x, t);
      }
    });
  }

  static OrbitSet on_grid(const StepMap& map, const Box& box, double grid_step, std::size_t n_max,
                          std::size_t threads = 1) {
    return OrbitSet(map, grid_points(box, grid_step), n_max, threads);
  }

  std::size_t size() const noexcept { return initial_.size(); }
  std::size_t horizon() const noexcept { return n_max_; }
  const std::vector<Vector>& initial_points() const noexcept { return initial_; }

  const double* state(std::size_t p, std::size_t t) const {
    return states_.data() + (p * n_max_ + t) * d_;
  }

  /// m^n(x_a, x_b) = max over t < n of |T^t x_a - T^t x_b|.
  double distance(std::size_t a, std::size_t b, std::size_t n) const {
    check_n(n);
    double best = 0.0;
    for (std::size_t t = 0; t < n; ++t) best = std::max(best, step_distance(a, b, t));
    return best;
  }

  /// Undirected lists of pairs at orbit distance < eps.
  std::vector<std::vector<std::size_t>> neighbors(std::size_t n, double eps) const {
    check_n(n);
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t p) { return state(p, 0)[0]; };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    std::vector<std::vector<std::size_t>> nb(size());
    const double eps2 = eps * eps;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const std::size_t a = order[oi];
      for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
        const std::size_t b = order[oj];
        if (key(b) - key(a) >= eps) break;
        bool close = true;
        for (std::size_t t = 0; t < n && close; ++t) close = step_distance2(a, b, t) < eps2;
        if (close) {
          nb[a].push_back(b);
          nb[b].push_back(a);
        }
      }
    }
    for (auto& v : nb) std::sort(v.begin(), v.end());
    return nb;
  }

 private:
  void check_n(std::size_t n) const {
    if (n == 0 || n > n_max_) {
      throw ValidationError("horizon " + std::to_string(n) + " outside [1, " +
                            std::to_string(n_max_) + "]");
    }
  }

  double step_distance2(std::size_t a, std::size_t b, std::size_t t) const {
    const double* xa = state(a, t);
    const double* xb = state(b, t);
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) s += (xa[i] - xb[i]) * (xa[i] - xb[i]);
    return s;
  }

  double step_distance(std::size_t a, std::size_t b, std::size_t t) const {
    return std::sqrt(step_distance2(a, b, t));
  }

  std::size_t n_max_;
  std::size_t d_ = 0;
  std::vector<Vector> initial_;
  std::vector<double> states_;
};

/// Greedy set cover by open orbit balls centred at grid orbits. Largest
/// uncovered gain first, ties to the lowest index.
inline std::size_t spanning_count(const OrbitSet& orbits, std::size_t n, double eps) {
  const auto nb = orbits.neighbors(n, eps);
  const std::size_t N = orbits.size();
  std::vector<bool> covered(N, false);
  std::size_t remaining = N;
  auto gain = [&](std::size_t c) {
    std::size_t g = covered[c] ? 0 : 1;
    for (auto j : nb[c]) g += covered[j] ? 0 : 1;
    return g;
  };
  using Entry = std::pair<std::size_t, std::size_t>;  // (gain, N - 1 - index)
  std::priority_queue<Entry> heap;
  for (std::size_t c = 0; c < N; ++c) heap.emplace(nb[c].size() + 1, N - 1 - c);
  std::size_t centres = 0;
  while (remaining > 0) {
    auto [stored, inv] = heap.top();
    heap.pop();
    const std::size_t c = N - 1 - inv;
    const std::size_t g = gain(c);
    if (g != stored) {
      if (g > 0) heap.emplace(g, inv);
      continue;
    }
    ++centres;
    if (!covered[c]) {
      covered[c] = true;
      --remaining;
    }
    for (auto j : nb[c]) {
      if (!covered[j]) {
        covered[j] = true;
        --remaining;
      }
    }
  }
  return centres;
}

/// Greedy maximal separated subset in index (lexicographic grid) order.
inline std::size_t separated_count(const OrbitSet& orbits, std::size_t n, double eps) {
  const auto nb = orbits.neighbors(n, eps);
  std::vector<bool> blocked(orbits.size(), false);
  std::size_t chosen = 0;
  for (std::size_t p = 0; p < orbits.size(); ++p) {
    if (blocked[p]) continue;
    ++chosen;
    for (auto j : nb[p]) blocked[j] = true;
  }
  return chosen;
}

namespace detail {

inline void check_grid_step(double grid_step, double eps) {
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  if (grid_step > eps / 2.0) throw ValidationError("grid step must be <= epsilon/2");
}

}  // namespace detail

inline std::size_t spanning_count(const StepMap& map, const Box& box, double grid_step,
                                  std::size_t n, double eps, std::size_t threads = 1) {
  detail::check_grid_step(grid_step, eps);
  return spanning_count(OrbitSet::on_grid(map, box, grid_step, n, threads), n, eps);
}

inline std::size_t separated_count(const StepMap& map, const Box& box, double grid_step,
                                   std::size_t n, double eps, std::size_t threads = 1) {
  detail::check_grid_step(grid_step, eps);
  return separated_count(OrbitSet::on_grid(map, box, grid_step, n, threads), n, eps);
}

struct EntropyRow {
  std::size_t n = 0;
  double epsilon = 0.0;
  std::size_t spanning = 0;
  std::size_t separated = 0;
  double hs_spanning = 0.0;
  double hs_separated = 0.0;
};

/// Full (n, eps) table on one grid; orbits are computed once for max(n_list).
inline std::vector<EntropyRow> entropy_table(const StepMap& map, const Box& box, double grid_step,
                                             const std::vector<std::size_t>& n_list,
                                             const std::vector<double>& eps_list,
                                             std::size_t threads = 1) {
  if (n_list.empty() || eps_list.empty()) throw ValidationError("empty (n, eps) table");
  for (double e : eps_list) detail::check_grid_step(grid_step, e);
  const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
  const OrbitSet orbits = OrbitSet::on_grid(map, box, grid_step, n_max, threads);
  std::vector<EntropyRow> rows;
  for (auto n : n_list) {
    for (double e : eps_list) {
      EntropyRow r;
      r.n = n;
      r.epsilon = e;
      r.spanning = spanning_count(orbits, n, e);
      r.separated = separated_count(orbits, n, e);
      r.hs_spanning = std::log2(static_cast<double>(r.spanning)) / static_cast<double>(n);
      r.hs_separated = std::log2(static_cast<double>(r.separated)) / static_cast<double>(n);
      rows.push_back(r);
    }
  }
  return rows;
}

/// M transformation sequences acting on L stacked copies of a d-state.
struct EnsemblePathSet {
  std::size_t L = 0;
  std::size_t M = 0;
  std::size_t n = 0;
  Vector z0;                          // dL-vector
  std::vector<std::vector<Vector>> paths;  // paths[m][t], t = 0 .. n
  Matrix pairwise_distances;          // M x M, max over t of |z_t^a - z_t^b|
};

/// Applies layer T_t blockwise to the L copies.
inline Vector apply_stacked(const AffineLayer& layer, const Vector& z, std::size_t L) {
  const auto d = layer.dim();
  if (z.size() != d * static_cast<Eigen::Index>(L)) {
    throw DimensionError("stacked state length does not match L*d");
  }
  Vector out(z.size());
  for (std::size_t l = 0; l < L; ++l) {
    const auto off = static_cast<Eigen::Index>(l) * d;
    out.segment(off, d) = apply_layer(layer, z.segment(off, d));
  }
  return out;
}

inline EnsemblePathSet ensemble_paths(const std::vector<LayeredNetwork>& sequences,
                                      const Vector& z0, std::size_t threads = 1) {
  if (sequences.empty()) throw ValidationError("ensemble needs at least one sequence");
  const auto d = sequences.front().dim();
  const std::size_t n = sequences.front().depth();
  for (const auto& s : sequences) {
    if (s.dim() != d) throw DimensionError("sequences must share the state dimension");
    if (s.depth() != n) throw DimensionError("sequences must share the length n");
  }
  if (z0.size() == 0 || z0.size() % d != 0) {
    throw DimensionError("start vector length is not a multiple of d");
  }
  EnsemblePathSet ps;
  ps.L = static_cast<std::size_t>(z0.size() / d);
  ps.M = sequences.size();
  ps.n = n;
  ps.z0 = z0;
  ps.paths.resize(ps.M);
  parallel_for(ps.M, threads, [&](std::size_t m) {
    std::vector<Vector> path{z0};
    for (std::size_t t = 0; t < n; ++t) {
      path.push_back(apply_stacked(sequences[m].layer(t), path.back(), ps.L));
    }
    ps.paths[m] = std::move(path);
  });
  ps.pairwise_distances = Matrix::Zero(static_cast<Eigen::Index>(ps.M), static_cast<Eigen::Index>(ps.M));
  for (std::size_t a = 0; a < ps.M; ++a) {
    for (std::size_t b = a + 1; b < ps.M; ++b) {
      double m = 0.0;
      for (std::size_t t = 0; t <= n; ++t) m = std::max(m, (ps.paths[a][t] - ps.paths[b][t]).norm());
      ps.pairwise_distances(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m;
      ps.pairwise_distances(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = m;
    }
  }
  return ps;
}

struct EnsembleCount {
  std::vector<std::size_t> cluster_id;  // per sequence
  std::size_t r_e = 0;
  double H_e = 0.0;                     // log2(r_e) / n
};

/// Leader clustering in sequence order: each path joins the first leader within
/// eps, otherwise starts a new cluster.
inline EnsembleCount cluster_paths(const Matrix& dist, std::size_t n, double eps) {
  if (dist.rows() == 0) throw ValidationError("ensemble needs at least one sequence");
  if (!(eps >= 0.0)) throw ValidationError("epsilon must be >= 0");
  if (n == 0) throw ValidationError("sequence length must be >= 1");
  EnsembleCount out;
  std::vector<Eigen::Index> leaders;
  for (Eigen::Index m = 0; m < dist.rows(); ++m) {
    std::size_t id = leaders.size();
    for (std::size_t k = 0; k < leaders.size(); ++k) {
      if (dist(m, leaders[k]) <= eps) {
        id = k;
        break;
      }
    }
    if (id == leaders.size()) leaders.push_back(m);
    out.cluster_id.push_back(id);
  }
  out.r_e = leaders.size();
  out.H_e = std::log2(static_cast<double>(out.r_e)) / static_cast<double>(n);
  return out;
}

inline EnsembleCount ensemble_path_count(const std::vector<LayeredNetwork>& sequences,
                                         const Vector& z0, double eps, std::size_t threads = 1) {
  const auto ps = ensemble_paths(sequences, z0, threads);
  return cluster_paths(ps.pairwise_distances, ps.n, eps);
}

}  // namespace dnnchaos::entropy
