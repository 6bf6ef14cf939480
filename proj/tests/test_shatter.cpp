#include <gtest/gtest.h>

#include "dnnchaos/shatter.hpp"

using namespace dnnchaos;
using namespace dnnchaos::shatter;

namespace {

Vector p2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

std::vector<Vector> square() { return {p2(1, 1), p2(-1, 1), p2(-1, -1), p2(1, -1)}; }

void expect_complete(const ShatterFamily& fam, std::size_t max_depth) {
  const std::size_t k = fam.points.size();
  ASSERT_EQ(fam.networks.size(), std::size_t{1} << k);
  for (std::size_t bits = 0; bits < fam.networks.size(); ++bits) {
    const auto& n = fam.networks[bits];
    EXPECT_EQ(n.target, labeling_from_bits(bits, k));
    EXPECT_GE(n.depth(), 1u);
    EXPECT_LE(n.depth(), max_depth);
    EXPECT_TRUE(verify(n, fam.points)) << "labeling " << bits << " margin " << verify_margin(n, fam.points);
    for (const auto& l : n.layers) EXPECT_EQ(l.activation(), ActivationKind::Tanh);
    EXPECT_NEAR(n.classifier.w().norm(), 1.0, 1e-12);
  }
}

}  // namespace

TEST(Hull, StrictConvexHull) {
  auto pts = square();
  pts.push_back(p2(0, 0));
  pts.push_back(p2(1, 0));  // on an edge: dropped
  const auto h = convex_hull(pts);
  EXPECT_EQ(h.size(), 4u);
  EXPECT_TRUE(in_hull(square(), p2(0.2, -0.3)));
  EXPECT_TRUE(in_hull(square(), p2(1, 0)));
  EXPECT_FALSE(in_hull(square(), p2(1.5, 0)));
}

TEST(Labeling, Bits) {
  EXPECT_EQ(labeling_from_bits(0b101, 3), (std::vector<int>{1, -1, 1}));
  EXPECT_EQ(labeling_from_bits(0, 2), (std::vector<int>{-1, -1}));
}

TEST(ShatterFour, AllSixteenLabelingsWithOneLayer) {
  const auto fam = shatter_four(square());
  expect_complete(fam, 1);
  EXPECT_EQ(fam.depth(), 1u);
}

TEST(ShatterFour, GeneralConvexQuadrilateral) {
  const auto fam = shatter_four({p2(0, 0), p2(3, 0.5), p2(2.5, 2), p2(-0.5, 1.5)});
  expect_complete(fam, 1);
}

TEST(ShatterFour, RejectsDegenerateInput) {
  EXPECT_THROW(shatter_four({p2(0, 0), p2(1, 0), p2(2, 0), p2(0, 1)}), DegenerateError);
  EXPECT_THROW(shatter_four({p2(0, 0), p2(2, 0), p2(0, 2), p2(0.5, 0.5)}), DegenerateError);
  EXPECT_THROW(shatter_four({p2(0, 0), p2(1, 0), p2(0, 1)}), ValidationError);
}

TEST(ShatterExtend, OneMorePointPerLayer) {
  auto fam = shatter_four(square());
  fam = shatter_extend(fam, p2(2.5, 0.3));
  expect_complete(fam, 2);
  fam = shatter_extend(fam, p2(-0.4, 2.6));
  expect_complete(fam, 3);
}

TEST(ShatterExtend, RejectsInteriorPoint) {
  const auto fam = shatter_four(square());
  EXPECT_THROW(shatter_extend(fam, p2(0.1, 0.2)), DegenerateError);
}

TEST(ShatterExtend, ThreadCountDoesNotChangeNetworks) {
  ShatterOptions o1, o4;
  o4.threads = 4;
  const auto a = shatter_extend(shatter_four(square(), o1), p2(2.5, 0.3), o1);
  const auto b = shatter_extend(shatter_four(square(), o4), p2(2.5, 0.3), o4);
  for (std::size_t i = 0; i < a.networks.size(); ++i) {
    ASSERT_EQ(a.networks[i].layers.size(), b.networks[i].layers.size());
    for (std::size_t l = 0; l < a.networks[i].layers.size(); ++l) {
      EXPECT_EQ(a.networks[i].layers[l], b.networks[i].layers[l]);
    }
    EXPECT_EQ(a.networks[i].margin, b.networks[i].margin);
  }
}
