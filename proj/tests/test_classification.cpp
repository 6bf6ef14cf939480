#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dnnchaos/classification.hpp"

using namespace dnnchaos;
using namespace dnnchaos::classification;

namespace {

Vector p2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

LabeledDataset comb(std::size_t n, double spacing) {
  std::vector<Vector> pts;
  std::vector<int> lab;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(Vector::Constant(1, spacing * double(i)));
    lab.push_back(i % 2 ? -1 : 1);
  }
  return LabeledDataset(pts, lab);
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(Dataset, ValidationAndDuplicates) {
  EXPECT_THROW(LabeledDataset({p2(0, 0)}, {0}), ValidationError);
  EXPECT_THROW(LabeledDataset({p2(0, 0), Vector::Zero(3)}, {1, 1}), DimensionError);
  EXPECT_THROW(LabeledDataset({p2(0, 0)}, {1, -1}), ValidationError);
  const LabeledDataset d({p2(0, 0), p2(0, 0), p2(1, 1), p2(1, 1)}, {1, -1, 1, 1});
  EXPECT_EQ(d.conflicting_duplicates(), 2u);
  const Box b = d.bounding_box();
  EXPECT_EQ(b.lo, p2(0, 0));
  EXPECT_EQ(b.hi, p2(1, 1));
}

TEST(Dataset, CsvLoading) {
  const auto ok = write_temp("dnnchaos_ds_ok.csv", "# comment\n0.5,1,1\n\n-2,3e-1,-1\n");
  const auto d = load_dataset_csv(ok);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.points[1], p2(-2, 0.3));
  EXPECT_EQ(d.labels[1], -1);
  const auto bad = write_temp("dnnchaos_ds_bad.csv", "0,0,1\n1,x,1\n");
  try {
    load_dataset_csv(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  const auto lab = write_temp("dnnchaos_ds_lab.csv", "0,0,0\n");
  EXPECT_THROW(load_dataset_csv(lab), ParseError);
  EXPECT_THROW(load_dataset_csv("/nonexistent/ds.csv"), ParseError);
  for (const auto& p : {ok, bad, lab}) std::remove(p.c_str());
}

TEST(Partition, HybridCount) {
  const LabeledDataset d({p2(0.1, 0.1), p2(0.2, 0.2), p2(1.1, 0.1), p2(1.2, 0.1)}, {1, -1, 1, 1});
  const GridPartition part{1.0, Vector::Zero(2), d.bounding_box()};
  EXPECT_EQ(hybrid_count(d, part), 1u);
  EXPECT_NEAR(part.radius(), std::sqrt(2.0), 1e-15);
}

/// Exhaustive reference: every dyadic side from `res` up to eps/sqrt(d) and
/// 512 evenly spaced offsets per side.
std::size_t exhaustive_min_hybrid(const LabeledDataset& data, double eps, double res) {
  std::size_t best = data.size();
  for (double side = res; side <= eps / std::sqrt(double(data.dim())); side *= 2) {
    for (int k = 0; k < 512; ++k) {
      const GridPartition part{side, Vector::Constant(data.dim(), side * k / 512.0), data.bounding_box()};
      best = std::min(best, hybrid_count(data, part));
    }
  }
  return best;
}

TEST(Complexity, CombMatchesExhaustiveOffsetSearch) {
  const double s = 0.125;
  const auto data = comb(16, s);
  ComplexityOptions opt;
  opt.offsets = 16;
  // floor at s: side-s cells hold one point each, so the comb is separated
  opt.resolution = s;
  const auto r0 = classification_complexity(data, 4 * s, opt);
  EXPECT_EQ(exhaustive_min_hybrid(data, 4 * s, s), 0u);
  EXPECT_TRUE(r0.separated());
  // floor at 2s: misaligned side-2s cells leave the end points alone (7 pairs)
  opt.resolution = 2 * s;
  const auto r1 = classification_complexity(data, 2 * s, opt);
  EXPECT_EQ(r1.hybrid_count, exhaustive_min_hybrid(data, 2 * s, 2 * s));
  EXPECT_EQ(r1.hybrid_count, 7u);
  ASSERT_TRUE(r1.complexity.has_value());
  EXPECT_DOUBLE_EQ(*r1.complexity, std::log2(7.0));
  const auto r2 = classification_complexity(data, 4 * s, opt);
  EXPECT_EQ(r2.hybrid_count, exhaustive_min_hybrid(data, 4 * s, 2 * s));
  EXPECT_EQ(r2.hybrid_count, 4u);
  EXPECT_EQ(r2.offsets_tried, 32u);
  // offset 0 alone is the aligned grid: 8 pairs at side 2s
  opt.offsets = 1;
  EXPECT_EQ(classification_complexity(data, 2 * s, opt).hybrid_count, 8u);
  EXPECT_THROW(classification_complexity(data, s, opt), ValidationError);
}

TEST(Complexity, SeparatedWithFineCells) {
  const auto data = comb(16, 0.125);
  const auto r = classification_complexity(data, 0.5);
  EXPECT_TRUE(r.separated());
  EXPECT_EQ(r.hybrid_count, 0u);
  // conflicting duplicates can never be separated
  const LabeledDataset dup({p2(0, 0), p2(0, 0), p2(1, 1)}, {1, -1, 1});
  const auto rd = classification_complexity(dup, 0.5);
  EXPECT_FALSE(rd.separated());
  EXPECT_EQ(rd.hybrid_count, 1u);
}

TEST(Complexity, DeterministicForSeed) {
  const LabeledDataset d({p2(0, 0), p2(0.3, 0.1), p2(0.9, 0.7), p2(0.2, 0.8), p2(0.5, 0.5)}, {1, -1, 1, -1, 1});
  ComplexityOptions opt;
  opt.resolution = 0.2;
  opt.seed = 9;
  const auto a = classification_complexity(d, 1.0, opt);
  const auto b = classification_complexity(d, 1.0, opt);
  EXPECT_EQ(a.hybrid_count, b.hybrid_count);
  EXPECT_EQ(a.best_offset, b.best_offset);
}

TEST(Margin, SimpleConfigurations) {
  const LabeledDataset two({p2(1, 0), p2(-1, 0)}, {1, -1});
  const auto m = affine_separable_margin(two);
  ASSERT_TRUE(m.margin.has_value());
  EXPECT_NEAR(*m.margin, 2.0, 1e-9);
  ASSERT_TRUE(m.classifier.has_value());
  EXPECT_EQ(m.classifier->decide(p2(1, 0)), 1);
  EXPECT_EQ(m.classifier->decide(p2(-1, 0)), -1);

  const LabeledDataset boxes({p2(0, 0), p2(0, 1), p2(2, 0.3), p2(2, 1.2), p2(3, -1)}, {-1, -1, 1, 1, 1});
  const auto mb = affine_separable_margin(boxes);
  ASSERT_TRUE(mb.margin.has_value());
  EXPECT_NEAR(*mb.margin, 2.0, 1e-8);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    EXPECT_GE(boxes.labels[i] * mb.classifier->score(boxes.points[i]), 1.0 - 1e-8);
  }

  const LabeledDataset xor_set({p2(1, 1), p2(-1, -1), p2(1, -1), p2(-1, 1)}, {1, 1, -1, -1});
  EXPECT_FALSE(affine_separable_margin(xor_set).margin.has_value());

  const LabeledDataset one({p2(1, 1), p2(-1, 3)}, {-1, -1});
  const auto mo = affine_separable_margin(one);
  EXPECT_TRUE(std::isinf(*mo.margin));
  for (const auto& p : one.points) EXPECT_EQ(mo.classifier->decide(p), -1);
}

TEST(Margin, TiltedHullDistance) {
  // Segment from (0,0) to (1,1) against the point (1,0): distance 1/sqrt(2).
  const LabeledDataset d({p2(0, 0), p2(1, 1), p2(1, 0)}, {1, 1, -1});
  const auto m = affine_separable_margin(d);
  ASSERT_TRUE(m.margin.has_value());
  EXPECT_NEAR(*m.margin, 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Bounds, Formulas) {
  EXPECT_DOUBLE_EQ(layer_lower_bound(3.0, 2.0), 2.0);
  EXPECT_THROW(layer_lower_bound(3.0, 0.0), ValidationError);
  EXPECT_DOUBLE_EQ(hausdorff_eps_delta(16, 0.5, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(hausdorff_eps_delta(16, 0.25, 4.0), 1.0);
  EXPECT_EQ(hausdorff_eps_delta(0, 0.5, 1.0), 0.0);
  EXPECT_THROW(hausdorff_eps_delta(4, 1.0, 1.0), ValidationError);
  EXPECT_DOUBLE_EQ(vc_upper_bound(0.5, 6), 3.0);
  EXPECT_THROW(vc_upper_bound(-1.0, 2), ValidationError);
}

TEST(Bounds, HausdorffOfCombScalesWithEpsilon) {
  const auto data = comb(16, 0.125);
  ComplexityOptions opt;
  opt.resolution = 0.25;
  opt.offsets = 1;
  EXPECT_DOUBLE_EQ(hausdorff_eps_delta(data, 0.25, 1.0, opt), 1.5);  // 8 cells of side 1/4
  EXPECT_DOUBLE_EQ(hausdorff_eps_delta(data, 0.5, 1.0, opt), 2.0);   // 4 cells of side 1/2
}
