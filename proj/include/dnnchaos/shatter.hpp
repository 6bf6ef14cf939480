#pragma once

// Constructive shattering in the plane: four points in convex position are
// shattered by one tanh layer, and each further tanh layer admits one more
// point outside the convex hull of the previous ones.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dnnchaos/classification.hpp"
#include "dnnchaos/core.hpp"
#include "dnnchaos/parallel.hpp"

namespace dnnchaos::shatter {

using classification::LabeledDataset;

struct ShatterNetwork {
  std::vector<AffineLayer> layers;  // tanh layers, d = 2
  LinearClassifier classifier;
  std::vector<int> target;          // labeling realized
  double margin = 0.0;              // min_i target_i (w . f(x_i) + b)

  std::size_t depth() const { return layers.size(); }

  Vector features(const Vector& x) const {
    Vector z = x;
    for (const auto& l : layers) z = apply_layer(l, z);
    return z;
  }
};

struct ShatterFamily {
  std::vector<Vector> points;
  std::vector<ShatterNetwork> networks;  // index = labeling bits; bit i set means point i is +1

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : networks) d = std::max(d, n.depth());
    return d;
  }
};

inline std::vector<int> labeling_from_bits(std::uint64_t bits, std::size_t k) {
  std::vector<int> lab(k);
  for (std::size_t i = 0; i < k; ++i) lab[i] = (bits >> i) & 1U ? 1 : -1;
  return lab;
}

/// Independent pass: recompute features and the signed margin of the claimed labeling.
inline double verify_margin(const ShatterNetwork& net, const std::vector<Vector>& points) {
  if (points.size() != net.target.size()) throw DimensionError("labeling length mismatch");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double s = net.classifier.score(net.features(points[i]));
    m = std::min(m, net.target[i] * s);
  }
  return m;
}

inline bool verify(const ShatterNetwork& net, const std::vector<Vector>& points,
                   double min_margin = 1e-6) {
  return verify_margin(net, points) > min_margin;
}

namespace detail {

inline double cross(const Vector& o, const Vector& a, const Vector& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace detail

/// Indices of the strict convex hull (counter-clockwise, collinear points dropped).
inline std::vector<std::size_t> convex_hull(const std::vector<Vector>& pts) {
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pts[a][0] < pts[b][0] || (pts[a][0] == pts[b][0] && pts[a][1] < pts[b][1]);
  });
  if (idx.size() < 3) return idx;
  std::vector<std::size_t> h(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    while (k >= 2 && detail::cross(pts[h[k - 2]], pts[h[k - 1]], pts[idx[i]]) <= 0.0) --k;
    h[k++] = idx[i];
  }
  for (std::size_t i = idx.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && detail::cross(pts[h[k - 2]], pts[h[k - 1]], pts[idx[i]]) <= 0.0) --k;
    h[k++] = idx[i];
  }
  h.resize(k - 1);
  return h;
}

/// True when q lies in the closed convex hull of pts.
inline bool in_hull(const std::vector<Vector>& pts, const Vector& q) {
  const auto h = convex_hull(pts);
  if (h.size() < 3) return false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (detail::cross(pts[h[i]], pts[h[(i + 1) % h.size()]], q) < 0.0) return false;
  }
  return true;
}

struct ShatterOptions {
  double stretch = 20.0;          // s in the diagonal-crossing construction
  double squeeze = 1e-3;          // lambda_2 upper bound for the orthogonal squeeze
  double accept_margin = 1e-4;    // images this separable need no extra layer
  std::size_t direction_samples = 3600;
  std::size_t threads = 1;
};

namespace detail {

inline std::optional<ShatterNetwork> classify_on(std::vector<AffineLayer> layers,
                                                 const std::vector<Vector>& points,
                                                 const std::vector<int>& target,
                                                 double min_margin) {
  ShatterNetwork probe{layers, LinearClassifier(Vector::Unit(2, 0), 0.0), target, 0.0};
  std::vector<Vector> feats;
  for (const auto& p : points) feats.push_back(probe.features(p));
  const auto mm = classification::affine_separable_margin(LabeledDataset(feats, target));
  if (!mm.margin || !mm.classifier) return std::nullopt;
  probe.classifier = *mm.classifier;
  probe.margin = verify_margin(probe, points);
  if (!(probe.margin > min_margin)) return std::nullopt;
  return probe;
}

inline AffineLayer near_identity_layer(const std::vector<Vector>& points) {
  double mx = 0.0;
  for (const auto& p : points) mx = std::max(mx, p.cwiseAbs().maxCoeff());
  const double kappa = 0.1 / std::max(mx, 1e-300);
  return AffineLayer(kappa * Matrix::Identity(2, 2), Vector::Zero(2), ActivationKind::Tanh);
}

}  // namespace detail

/// All 16 labelings of four points in convex position with one tanh layer.
/// Separable labelings use a near-identity layer tanh(kappa x); the two
/// diagonal labelings move the diagonal crossing to the origin, stretch one
/// diagonal by s, compress the other by 1/s, shift by (0, 1) and apply tanh.
inline ShatterFamily shatter_four(const std::vector<Vector>& points, const ShatterOptions& opt = {}) {
  if (points.size() != 4) throw ValidationError("shatter_four needs exactly four points");
  for (const auto& p : points) {
    if (p.size() != 2) throw DimensionError("shattering construction is 2-D");
  }
  const auto hull = convex_hull(points);
  if (hull.size() != 4) throw DegenerateError("points are not in strictly convex position");

  // Diagonals in hull order: L1 = (h0, h2), L2 = (h1, h3).
  const Vector& a0 = points[hull[0]];
  const Vector& a2 = points[hull[2]];
  const Vector& b1 = points[hull[1]];
  const Vector& b3 = points[hull[3]];
  Matrix U(2, 2);
  U.col(0) = (a2 - a0).normalized();
  U.col(1) = (b3 - b1).normalized();
  Matrix S(2, 2);
  S.col(0) = a2 - a0;
  S.col(1) = -(b3 - b1);
  const Vector ts = S.colPivHouseholderQr().solve(b1 - a0);
  const Vector c = a0 + ts[0] * (a2 - a0);
  const Matrix Uinv = U.inverse();
  auto coord = [&](const Vector& p) { return Vector(Uinv * (p - c)); };
  const double a_ref = std::min(std::abs(coord(a0)[0]), std::abs(coord(a2)[0]));
  const double b_ref = std::max(std::abs(coord(b1)[1]), std::abs(coord(b3)[1]));
  if (!(a_ref > 0.0) || !(b_ref > 0.0)) throw DegenerateError("diagonals do not cross properly");

  Matrix M(2, 2);
  M.col(0) = (opt.stretch / a_ref) * Vector::Ones(2);
  M.col(1) << 1.0 / (opt.stretch * b_ref), -1.0 / (opt.stretch * b_ref);
  const Matrix A1 = M * Uinv;
  Vector bias(2);
  bias << 0.0, 1.0;
  const AffineLayer crossing(A1, bias - A1 * c, ActivationKind::Tanh);
  const AffineLayer near_id = detail::near_identity_layer(points);

  auto is_diagonal = [&](const std::vector<int>& lab) {
    return lab[hull[0]] == lab[hull[2]] && lab[hull[1]] == lab[hull[3]] && lab[hull[0]] != lab[hull[1]];
  };

  ShatterFamily fam;
  fam.points = points;
  fam.networks.resize(16, ShatterNetwork{{}, LinearClassifier(Vector::Unit(2, 0), 0.0), {}, 0.0});
  std::vector<std::string> failures(16);
  parallel_for(16, opt.threads, [&](std::size_t bits) {
    const auto lab = labeling_from_bits(bits, 4);
    const bool one_class = std::all_of(lab.begin(), lab.end(), [&](int v) { return v == lab[0]; });
    if (one_class) {
      ShatterNetwork net{{near_id}, LinearClassifier(Vector::Unit(2, 0), 0.0), lab, 0.0};
      std::vector<Vector> feats;
      for (const auto& p : points) feats.push_back(net.features(p));
      net.classifier = classification::detail::constant_side(2, feats, lab[0]);
      net.margin = verify_margin(net, points);
      fam.networks[bits] = std::move(net);
      return;
    }
    const AffineLayer& layer = is_diagonal(lab) ? crossing : near_id;
    auto net = detail::classify_on({layer}, points, lab, 1e-6);
    if (!net) {
      failures[bits] = "labeling " + std::to_string(bits) + " not realized";
      return;
    }
    fam.networks[bits] = std::move(*net);
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw DegenerateError(f);
  }
  return fam;
}

namespace detail {

/// atanh(0.5 tanh X): the preimage of the line u2 = u1 / 2 under tanh; concave for X > 0.
inline double half_curve(double X) { return std::atanh(0.5 * std::tanh(X)); }

struct IntervalChoice {
  Vector v;        // unit projection direction
  double tau1 = 0.0, tau2 = 0.0;  // the middle run lies in (tau1, tau2)
  double score = -1.0;            // smallest run-boundary gap over the projection range
};

/// Projections along v must form at most three label runs A B A with B in the middle.
inline std::optional<IntervalChoice> interval_along(const std::vector<Vector>& z,
                                                    const std::vector<int>& lab, Vector v) {
  v.normalize();
  std::vector<std::pair<double, int>> pr;
  for (std::size_t i = 0; i < z.size(); ++i) pr.emplace_back(v.dot(z[i]), lab[i]);
  std::sort(pr.begin(), pr.end());
  const double range = pr.back().first - pr.front().first;
  if (!(range > 0.0)) return std::nullopt;
  std::vector<std::size_t> cuts;  // index j where run changes between j-1 and j
  for (std::size_t j = 1; j < pr.size(); ++j) {
    if (pr[j].second != pr[j - 1].second) cuts.push_back(j);
  }
  if (cuts.size() != 2) return std::nullopt;
  IntervalChoice c;
  c.v = v;
  double g = std::numeric_limits<double>::infinity();
  for (auto j : cuts) g = std::min(g, (pr[j].first - pr[j - 1].first) / range);
  if (!(g > 0.0)) return std::nullopt;
  c.score = g;
  c.tau1 = 0.5 * (pr[cuts[0]].first + pr[cuts[0] - 1].first);
  c.tau2 = 0.5 * (pr[cuts[1]].first + pr[cuts[1] - 1].first);
  return c;
}

/// Layer whose tanh image splits the middle projection run from the outer ones
/// along the line u2 = u1 / 2: X = alpha v.z + beta0 spans [0.25, 2.5], the
/// second pre-activation is the chord of the concave curve through X(tau1),
/// X(tau2), plus a small orthogonal term that keeps the layer invertible.
inline std::optional<AffineLayer> interval_layer(const std::vector<Vector>& z,
                                                 const IntervalChoice& ch, double squeeze) {
  double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
  for (const auto& p : z) {
    pmin = std::min(pmin, ch.v.dot(p));
    pmax = std::max(pmax, ch.v.dot(p));
  }
  const double alpha = (2.5 - 0.25) / (pmax - pmin);
  const double beta0 = 0.25 - alpha * pmin;
  const double X1 = alpha * ch.tau1 + beta0;
  const double X2 = alpha * ch.tau2 + beta0;
  const double m = (half_curve(X2) - half_curve(X1)) / (X2 - X1);
  const double c0 = half_curve(X1) - m * X1;
  Vector vp(2);
  vp << -ch.v[1], ch.v[0];
  double gmin = std::numeric_limits<double>::infinity();
  double nmax = 0.0;
  for (const auto& p : z) {
    const double X = alpha * ch.v.dot(p) + beta0;
    gmin = std::min(gmin, std::abs(half_curve(X) - (m * X + c0)));
    nmax = std::max(nmax, std::abs(vp.dot(p)));
  }
  const double mu = nmax > 0.0 ? std::min(squeeze, gmin / (4.0 * nmax)) : squeeze;
  if (!(mu > 1e-12)) {
    throw DegenerateError("orthogonal squeeze underflow (mu = " + std::to_string(mu) +
                          ", boundary gap " + std::to_string(gmin) + ")");
  }
  Matrix W(2, 2);
  W.row(0) = alpha * ch.v.transpose();
  W.row(1) = m * alpha * ch.v.transpose() + mu * vp.transpose();
  Vector b(2);
  b << beta0, m * beta0 + c0;
  return AffineLayer(std::move(W), std::move(b), ActivationKind::Tanh);
}

inline std::optional<IntervalChoice> choose_interval(const std::vector<Vector>& z,
                                                     const std::vector<int>& lab,
                                                     std::size_t samples) {
  // First the direction from the new point's image to the centroid of its class.
  const std::size_t last = z.size() - 1;
  Vector centroid = Vector::Zero(2);
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < last; ++i) {
    if (lab[i] == lab[last]) {
      centroid += z[i];
      ++cnt;
    }
  }
  if (cnt > 0) {
    const Vector dir = z[last] - centroid / static_cast<double>(cnt);
    if (dir.norm() > 0.0) {
      if (auto c = interval_along(z, lab, dir)) return c;
    }
  }
  std::optional<IntervalChoice> best;
  for (std::size_t k = 0; k < samples; ++k) {
    const double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(samples);
    Vector v(2);
    v << std::cos(th), std::sin(th);
    auto c = interval_along(z, lab, v);
    if (c && (!best || c->score > best->score)) best = c;
  }
  return best;
}

}  // namespace detail

/// Adds one exterior point. Each labeling starts from the network of its
/// restriction to the old points; if those features already separate the new
/// labeling only the classifier changes, otherwise one interval layer is appended.
inline ShatterFamily shatter_extend(const ShatterFamily& base, const Vector& new_point,
                                    const ShatterOptions& opt = {}) {
  if (new_point.size() != 2) throw DimensionError("shattering construction is 2-D");
  const std::size_t k = base.points.size();
  if (k == 0 || base.networks.size() != (std::size_t{1} << k)) {
    throw ValidationError("base family must realize all labelings of its points");
  }
  if (k + 1 > 20) throw RefusedError("too many labelings");
  if (in_hull(base.points, new_point)) {
    throw DegenerateError("new point lies inside the convex hull of the shattered set");
  }
  ShatterFamily fam;
  fam.points = base.points;
  fam.points.push_back(new_point);
  const std::size_t total = std::size_t{1} << (k + 1);
  fam.networks.resize(total, ShatterNetwork{{}, LinearClassifier(Vector::Unit(2, 0), 0.0), {}, 0.0});
  std::vector<std::string> failures(total);

  parallel_for(total, opt.threads, [&](std::size_t bits) {
    const auto lab = labeling_from_bits(bits, k + 1);
    const std::size_t restricted = bits & ((std::size_t{1} << k) - 1);
    std::vector<std::size_t> prefixes{restricted};
    for (std::size_t j = 0; j < base.networks.size(); ++j) {
      if (j != restricted) prefixes.push_back(j);
    }
    // Same depth first (classifier change only), then one extra interval layer.
    for (std::size_t j : prefixes) {
      if (auto net = detail::classify_on(base.networks[j].layers, fam.points, lab, opt.accept_margin)) {
        fam.networks[bits] = std::move(*net);
        return;
      }
      if (j == restricted) break;
    }
    for (std::size_t j : prefixes) {
      const auto& pre = base.networks[j].layers;
      std::vector<Vector> z;
      ShatterNetwork probe{pre, LinearClassifier(Vector::Unit(2, 0), 0.0), lab, 0.0};
      for (const auto& p : fam.points) z.push_back(probe.features(p));
      const auto choice = detail::choose_interval(z, lab, opt.direction_samples);
      if (!choice) continue;
      std::optional<AffineLayer> layer;
      try {
        layer = detail::interval_layer(z, *choice, opt.squeeze);
      } catch (const DegenerateError&) {
        continue;
      }
      auto layers = pre;
      layers.push_back(*layer);
      if (auto net = detail::classify_on(std::move(layers), fam.points, lab, 1e-6)) {
        fam.networks[bits] = std::move(*net);
        return;
      }
    }
    failures[bits] = "labeling " + std::to_string(bits) + " could not be realized";
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw DegenerateError(f);
  }
  return fam;
}

}  // namespace dnnchaos::shatter
