#pragma once

// Partition-based classification complexity, maximum-margin separability and
// the depth / dimension bounds built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dnnchaos/core.hpp"

namespace dnnchaos::classification {

struct LabeledDataset {
  std::vector<Vector> points;
  std::vector<int> labels;  // each -1 or +1

  LabeledDataset() = default;
  LabeledDataset(std::vector<Vector> pts, std::vector<int> lab)
      : points(std::move(pts)), labels(std::move(lab)) {
    validate();
  }

  void validate() const {
    if (points.empty()) throw ValidationError("dataset needs at least one point");
    if (points.size() != labels.size()) throw ValidationError("points and labels differ in length");
    const auto d = points.front().size();
    if (d == 0) throw DimensionError("points must have positive dimension");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != d) throw DimensionError("point " + std::to_string(i) + " has wrong dimension");
      if (!points[i].allFinite()) throw ValidationError("point " + std::to_string(i) + " is not finite");
      if (labels[i] != 1 && labels[i] != -1) throw ValidationError("labels must be -1 or +1");
    }
  }

  Eigen::Index dim() const { return points.front().size(); }
  std::size_t size() const { return points.size(); }

  Box bounding_box() const {
    Box b{points.front(), points.front()};
    for (const auto& p : points) {
      b.lo = b.lo.cwiseMin(p);
      b.hi = b.hi.cwiseMax(p);
    }
    return b;
  }

  /// Number of points that coincide with a point of the opposite label.
  std::size_t conflicting_duplicates() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = 0; j < size(); ++j) {
        if (labels[i] != labels[j] && points[i] == points[j]) {
          ++n;
          break;
        }
      }
    }
    return n;
  }
};

/// CSV rows "x1,...,xd,label"; blank lines and lines starting with '#' are skipped.
inline LabeledDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  std::vector<Vector> pts;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() < 2) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": need coordinates and a label");
    }
    Vector p(static_cast<Eigen::Index>(vals.size() - 1));
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) p[static_cast<Eigen::Index>(i)] = vals[i];
    const double lab = vals.back();
    if (lab != 1.0 && lab != -1.0) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": label must be -1 or 1");
    }
    pts.push_back(std::move(p));
    labels.push_back(lab > 0 ? 1 : -1);
  }
  try {
    return LabeledDataset(std::move(pts), std::move(labels));
  } catch (const Error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Axis-aligned grid of cubes with side `cell_side`; cell boundaries sit at
/// box.lo - offset + k * cell_side.
struct GridPartition {
  double cell_side = 1.0;
  Vector offset;
  Box box;

  double radius() const { return cell_side * std::sqrt(static_cast<double>(offset.size())); }

  std::vector<long long> cell_of(const Vector& x) const {
    std::vector<long long> idx(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      idx[static_cast<std::size_t>(i)] =
          static_cast<long long>(std::floor((x[i] - box.lo[i] + offset[i]) / cell_side));
    }
    return idx;
  }
};

/// Cells containing points of both labels.
inline std::size_t hybrid_count(const LabeledDataset& data, const GridPartition& part) {
  if (part.offset.size() != data.dim()) throw DimensionError("partition dimension mismatch");
  std::map<std::vector<long long>, int> seen;  // bit 1: +1 present, bit 2: -1 present
  for (std::size_t i = 0; i < data.size(); ++i) {
    seen[part.cell_of(data.points[i])] |= data.labels[i] > 0 ? 1 : 2;
  }
  std::size_t n = 0;
  for (const auto& kv : seen) n += kv.second == 3 ? 1 : 0;
  return n;
}

struct ComplexityOptions {
  std::size_t offsets = 16;           // partitions tried per cell side (offset 0 included)
  std::optional<double> resolution;   // smallest cell side; default 2^-10 of the box width
  std::uint64_t seed = 0;
};

struct ComplexityReport {
  double epsilon = 0.0;
  std::size_t hybrid_count = 0;
  std::optional<double> complexity;  // log2(hybrid_count); unset means "separated"
  std::size_t offsets_tried = 0;
  double best_side = 0.0;
  Vector best_offset;
  double resolution = 0.0;

  bool separated() const { return !complexity.has_value(); }
};

inline double default_resolution(const LabeledDataset& data) {
  const Box b = data.bounding_box();
  const double width = (b.hi - b.lo).maxCoeff();
  return (width > 0.0 ? width : 1.0) * std::ldexp(1.0, -10);
}

/// Minimum hybrid count over grid partitions of radius <= eps. Cell sides are
/// resolution * 2^k (independent of eps, so a larger eps tries a superset), and
/// each side tries offset 0 plus pseudo-random offsets seeded by k.
inline ComplexityReport classification_complexity(const LabeledDataset& data, double epsilon,
                                                  const ComplexityOptions& opt = {}) {
  data.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be positive");
  if (opt.offsets == 0) throw ValidationError("need at least one offset");
  const double res = opt.resolution ? *opt.resolution : default_resolution(data);
  if (!(res > 0.0)) throw ValidationError("resolution must be positive");
  const double max_side = epsilon / std::sqrt(static_cast<double>(data.dim()));
  if (res > max_side) {
    throw ValidationError("epsilon is below the resolution floor (max side " +
                          std::to_string(max_side) + " < " + std::to_string(res) + ")");
  }
  ComplexityReport rep;
  rep.epsilon = epsilon;
  rep.resolution = res;
  rep.hybrid_count = std::numeric_limits<std::size_t>::max();
  const Box box = data.bounding_box();
  for (int k = 0;; ++k) {
    const double side = std::ldexp(res, k);
    if (side > max_side) break;
    CounterRng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(k)}));
    for (std::size_t o = 0; o < opt.offsets; ++o) {
      Vector off = Vector::Zero(data.dim());
      if (o > 0) {
        for (Eigen::Index i = 0; i < off.size(); ++i) off[i] = side * rng.uniform();
      }
      const GridPartition part{side, off, box};
      const std::size_t h = hybrid_count(data, part);
      ++rep.offsets_tried;
      if (h < rep.hybrid_count) {
        rep.hybrid_count = h;
        rep.best_side = side;
        rep.best_offset = off;
      }
    }
  }
  if (rep.hybrid_count > 0) rep.complexity = std::log2(static_cast<double>(rep.hybrid_count));
  return rep;
}

struct MarginResult {
  std::optional<double> margin;  // full gap between the classes; unset means not separable
  std::optional<LinearClassifier> classifier;
  std::size_t iterations = 0;
  double gap = 0.0;              // |v| minus the certified margin at exit
};

struct MarginOptions {
  std::size_t max_iterations = 100000;
  double relative_tolerance = 1e-10;
};

namespace detail {

inline LinearClassifier constant_side(Eigen::Index d, const std::vector<Vector>& pts, int label) {
  Vector w = Vector::Zero(d);
  w[0] = 1.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pts) {
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  return LinearClassifier(w, label > 0 ? 1.0 - lo : -1.0 - hi);
}

}  // namespace detail

/// Largest eps such that a unit hyperplane leaves each class at distance eps/2:
/// the distance between the convex hulls, found by pairwise Frank-Wolfe steps
/// (MDM-style weight transfer) on the two simplices. A margin is reported only
/// when the hyperplane normal to the current difference vector strictly
/// separates the classes and its margin is within tolerance of |v|.
inline MarginResult affine_separable_margin(const LabeledDataset& data,
                                            const MarginOptions& opt = {}) {
  data.validate();
  std::vector<Vector> P, N;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (data.labels[i] > 0 ? P : N).push_back(data.points[i]);
  }
  MarginResult res;
  if (P.empty() || N.empty()) {
    res.margin = std::numeric_limits<double>::infinity();
    res.classifier = detail::constant_side(data.dim(), data.points, P.empty() ? -1 : 1);
    return res;
  }
  std::vector<double> alpha(P.size(), 0.0), beta(N.size(), 0.0);
  alpha[0] = 1.0;
  beta[0] = 1.0;
  Vector v = P[0] - N[0];
  double scale = 0.0;
  for (const auto& p : data.points) scale = std::max(scale, p.norm());
  scale = std::max(scale, 1.0);

  auto certified = [&](const Vector& vv, double& lo_p, double& hi_n) {
    lo_p = std::numeric_limits<double>::infinity();
    hi_n = -lo_p;
    for (const auto& p : P) lo_p = std::min(lo_p, vv.dot(p));
    for (const auto& n : N) hi_n = std::max(hi_n, vv.dot(n));
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    const double vn = v.norm();
    if (vn <= 1e-14 * scale) break;
    double lo_p, hi_n;
    certified(v, lo_p, hi_n);
    const double m = (lo_p - hi_n) / vn;
    res.gap = vn - m;
    if (m > 0.0 && vn - m <= opt.relative_tolerance * (1.0 + vn)) break;

    // P side: move weight from the active point with largest <v,x> to the point with smallest.
    std::size_t ps = 0, pa = 0;
    double best_s = std::numeric_limits<double>::infinity(), best_a = -best_s;
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double s = v.dot(P[i]);
      if (s < best_s) { best_s = s; ps = i; }
      if (alpha[i] > 0.0 && s > best_a) { best_a = s; pa = i; }
    }
    // N side: move weight from the active point with smallest <v,y> to the largest.
    std::size_t ns = 0, na = 0;
    double nbest_s = -std::numeric_limits<double>::infinity(), nbest_a = -nbest_s;
    for (std::size_t j = 0; j < N.size(); ++j) {
      const double s = v.dot(N[j]);
      if (s > nbest_s) { nbest_s = s; ns = j; }
      if (beta[j] > 0.0 && s < nbest_a) { nbest_a = s; na = j; }
    }
    double dec_p = 0.0, t_p = 0.0, dec_n = 0.0, t_n = 0.0;
    Vector dp = P[ps] - P[pa];
    Vector dn = -(N[ns] - N[na]);
    if (ps != pa && dp.squaredNorm() > 0.0) {
      t_p = std::clamp(-v.dot(dp) / dp.squaredNorm(), 0.0, alpha[pa]);
      dec_p = -(2.0 * t_p * v.dot(dp) + t_p * t_p * dp.squaredNorm());
    }
    if (ns != na && dn.squaredNorm() > 0.0) {
      t_n = std::clamp(-v.dot(dn) / dn.squaredNorm(), 0.0, beta[na]);
      dec_n = -(2.0 * t_n * v.dot(dn) + t_n * t_n * dn.squaredNorm());
    }
    if (!(dec_p > 0.0) && !(dec_n > 0.0)) break;
    if (dec_p >= dec_n) {
      alpha[pa] -= t_p;
      alpha[ps] += t_p;
      if (alpha[pa] < 0.0) alpha[pa] = 0.0;
    } else {
      beta[na] -= t_n;
      beta[ns] += t_n;
      if (beta[na] < 0.0) beta[na] = 0.0;
    }
    // Recompute from weights to avoid drift.
    v = Vector::Zero(data.dim());
    for (std::size_t i = 0; i < P.size(); ++i) if (alpha[i] > 0.0) v += alpha[i] * P[i];
    for (std::size_t j = 0; j < N.size(); ++j) if (beta[j] > 0.0) v -= beta[j] * N[j];
  }
  const double vn = v.norm();
  if (vn > 0.0) {
    double lo_p, hi_n;
    certified(v, lo_p, hi_n);
    const double m = (lo_p - hi_n) / vn;
    res.gap = vn - m;
    if (m > 0.0) {
      res.margin = m;
      const Vector w = v / vn;
      res.classifier = LinearClassifier::normalized(w, -0.5 * (lo_p + hi_n) / vn);
    }
  }
  return res;
}

/// Smallest depth compatible with complexity C and per-layer entropy Hs: (C + 1) / Hs.
inline double layer_lower_bound(double complexity, double Hs) {
  if (!(Hs > 0.0)) throw ValidationError("per-layer entropy must be positive (bound vacuous)");
  return (complexity + 1.0) / Hs;
}

/// Infimal d with N eps^d <= delta, i.e. (log2 delta - log2 N) / log2 eps; 0 when N = 0.
inline double hausdorff_eps_delta(std::size_t N, double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  if (N == 0) return 0.0;
  return (std::log2(delta) - std::log2(static_cast<double>(N))) / std::log2(epsilon);
}

inline double hausdorff_eps_delta(const LabeledDataset& data, double epsilon, double delta,
                                  const ComplexityOptions& opt = {}) {
  const auto rep = classification_complexity(data, epsilon, opt);
  return hausdorff_eps_delta(rep.hybrid_count, epsilon, delta);
}

inline double vc_upper_bound(double He, std::size_t D) {
  if (!(He >= 0.0)) throw ValidationError("ensemble entropy must be >= 0");
  return He * static_cast<double>(D);
}

}  // namespace dnnchaos::classification
