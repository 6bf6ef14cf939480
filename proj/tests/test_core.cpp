#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dnnchaos/core.hpp"
#include "dnnchaos/parallel.hpp"

using namespace dnnchaos;

namespace {

Matrix mat1(double a) {
  Matrix m(1, 1);
  m << a;
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Activation, RangesAndNames) {
  EXPECT_EQ(activate(ActivationKind::ReLU, -3.0), 0.0);
  EXPECT_EQ(activate(ActivationKind::ReLU, 2.5), 2.5);
  EXPECT_EQ(activate(ActivationKind::Linear, -7.0), -7.0);
  EXPECT_LE(std::abs(activate(ActivationKind::Tanh, 50.0)), 1.0);
  for (auto k : {ActivationKind::Tanh, ActivationKind::ReLU, ActivationKind::Linear}) {
    EXPECT_EQ(activation_from_string(to_string(k)), k);
  }
  EXPECT_THROW(activation_from_string("sigmoid"), ValidationError);
}

TEST(Activation, SlopeFromPreactivationMatchesOutputForm) {
  for (double h : {-3.0, -0.7, 0.0, 0.2, 1.9, 4.0}) {
    const double y = std::tanh(h);
    EXPECT_NEAR(activation_slope(ActivationKind::Tanh, h),
                activation_slope_from_output(ActivationKind::Tanh, y), 1e-14);
  }
  // tanh(25) rounds to 1, so the output form loses the slope entirely.
  EXPECT_EQ(activation_slope_from_output(ActivationKind::Tanh, std::tanh(25.0)), 0.0);
  EXPECT_GT(activation_slope(ActivationKind::Tanh, 25.0), 0.0);
  EXPECT_EQ(activation_slope(ActivationKind::ReLU, 0.0), 0.0);
  EXPECT_EQ(activation_slope(ActivationKind::ReLU, 1e-300), 1.0);
}

TEST(AffineLayer, RejectsMalformedParameters) {
  EXPECT_THROW(AffineLayer(Matrix::Zero(2, 3), Vector::Zero(2), ActivationKind::Tanh), DimensionError);
  EXPECT_THROW(AffineLayer(Matrix::Zero(2, 2), Vector::Zero(3), ActivationKind::Tanh), DimensionError);
  Matrix w = Matrix::Identity(2, 2);
  w(0, 1) = std::nan("");
  EXPECT_THROW(AffineLayer(w, Vector::Zero(2), ActivationKind::Tanh), ValidationError);
  EXPECT_THROW(LayeredNetwork({}), ValidationError);
  EXPECT_THROW(LayeredNetwork({AffineLayer::identity(2), AffineLayer::identity(3)}), DimensionError);
}

TEST(Forward, TanhIterateMatchesOracle) {
  // oracle: tanh(2 tanh(1)) at 40 digits
  const LayeredNetwork net({AffineLayer(mat1(2.0), Vector::Zero(1), ActivationKind::Tanh),
                            AffineLayer(mat1(2.0), Vector::Zero(1), ActivationKind::Tanh)});
  const auto traj = forward_trajectory(net, vec({0.5}));
  ASSERT_EQ(traj.states.size(), 3u);
  EXPECT_DOUBLE_EQ(traj.states[1][0], std::tanh(1.0));
  EXPECT_NEAR(traj.states[2][0], 0.90925167399694250791, 1e-15);
  EXPECT_EQ(traj.zero_crossings, 0u);
}

TEST(Forward, CountsExactReluKinks) {
  Matrix w = Matrix::Identity(2, 2);
  const LayeredNetwork net({AffineLayer(w, vec({-1.0, 0.0}), ActivationKind::ReLU)});
  const auto traj = forward_trajectory(net, vec({1.0, 0.0}));
  EXPECT_EQ(traj.zero_crossings, 2u);
  JacobianDiagnostics diag;
  const Matrix j = jacobian_product(net, vec({1.0, 0.0}), &diag);
  EXPECT_EQ(diag.nondifferentiable, 2u);
  EXPECT_EQ(j.norm(), 0.0);
}

TEST(Forward, ReportsLayerOfNonFiniteState) {
  const LayeredNetwork net({AffineLayer(mat1(1e200), Vector::Zero(1), ActivationKind::Linear),
                            AffineLayer(mat1(1e200), Vector::Zero(1), ActivationKind::Linear)});
  try {
    forward(net, vec({1.0}));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    ASSERT_TRUE(e.layer().has_value());
    EXPECT_EQ(*e.layer(), 1u);
  }
  EXPECT_THROW(forward(net, vec({1.0, 2.0})), DimensionError);
}

TEST(Jacobian, MatchesCentralDifferences) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    EnsembleSpec spec;
    spec.d = 2 + s % 5;
    spec.depth = 1 + s % 4;
    spec.entry_variance = 1.5;
    spec.bias_variance = 0.3;
    spec.scaling = VarianceScaling::OneOverD;
    spec.seed = derive_seed(77, {s});
    const auto net = generate_gaussian_network(spec);
    const Vector x0 = random_point(spec.d, -1.0, 1.0, derive_seed(78, {s}));
    const Matrix j = jacobian_product(net, x0);
    const double h = 1e-6;
    Matrix fd(j.rows(), j.cols());
    for (Eigen::Index c = 0; c < j.cols(); ++c) {
      Vector p = x0, m = x0;
      p[c] += h;
      m[c] -= h;
      fd.col(c) = (forward(net, p) - forward(net, m)) / (2 * h);
    }
    EXPECT_LT((fd - j).norm() / j.norm(), 1e-7) << "seed " << s;
  }
}

TEST(Ensemble, GenerationIsDeterministic) {
  EnsembleSpec spec;
  spec.d = 5;
  spec.depth = 3;
  spec.seed = 99;
  EXPECT_EQ(generate_gaussian_network(spec), generate_gaussian_network(spec));
  spec.seed = 100;
  const auto other = generate_gaussian_network(spec);
  spec.seed = 99;
  EXPECT_FALSE(other == generate_gaussian_network(spec));
  const GaussianLayerStream stream(spec);
  EXPECT_EQ(stream(7), stream(7));
  EXPECT_FALSE(stream(7) == stream(8));
}

TEST(Ensemble, EntryVarianceFollowsScaling) {
  EnsembleSpec spec;
  spec.d = 40;
  spec.depth = 50;
  spec.entry_variance = 4.0;
  spec.scaling = VarianceScaling::OneOverD;
  spec.seed = 3;
  EXPECT_DOUBLE_EQ(spec.effective_entry_variance(), 0.1);
  const auto net = generate_gaussian_network(spec);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& l : net.layers()) {
    sum += l.weights().sum();
    sq += l.weights().squaredNorm();
    n += static_cast<std::size_t>(l.weights().size());
    EXPECT_EQ(l.bias().norm(), 0.0);
  }
  const double var = sq / n - (sum / n) * (sum / n);
  // 80000 samples: standard error of the variance is about 0.1 * sqrt(2/80000)
  EXPECT_NEAR(var, 0.1, 0.1 * 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sum / n, 0.0, 5 * std::sqrt(0.1 / n));
  spec.entry_variance = -1.0;
  EXPECT_THROW(spec.validate(), ValidationError);
  EXPECT_THROW(scaling_from_string("sqrt"), ValidationError);
}

TEST(Rng, CounterStreamsAreReproducibleAndDistinct) {
  CounterRng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(1, {i}));
  seeds.insert(derive_seed(1, {0, 0}));
  EXPECT_EQ(seeds.size(), 1001u);
  CounterRng g(11);
  double m = 0.0, v = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = g.gaussian();
    m += z;
    v += z * z;
  }
  EXPECT_NEAR(m / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(v / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  CounterRng u(12);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = std::sin(static_cast<double>(i)); });
  parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = std::sin(static_cast<double>(i)); });
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 4) throw ValidationError("boom");
                            }),
               ValidationError);
}

TEST(LinearClassifier, RequiresUnitNormal) {
  EXPECT_THROW(LinearClassifier(vec({1.0, 1.0}), 0.0), ValidationError);
  const auto c = LinearClassifier::normalized(vec({3.0, 4.0}), 10.0);
  EXPECT_NEAR(c.w().norm(), 1.0, 1e-15);
  EXPECT_NEAR(c.b(), 2.0, 1e-15);
  EXPECT_EQ(c.decide(vec({1.0, 1.0})), 1);
  EXPECT_EQ(c.decide(vec({-10.0, -10.0})), -1);
}

TEST(Box, ValidatesAndClips) {
  Box b{vec({0.0, -1.0}), vec({1.0, 1.0})};
  EXPECT_NO_THROW(b.validate());
  EXPECT_EQ(b.clip(vec({2.0, -3.0})), vec({1.0, -1.0}));
  Box bad{vec({1.0}), vec({0.0})};
  EXPECT_THROW(bad.validate(), ValidationError);
}
