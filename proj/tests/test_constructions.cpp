#include <gtest/gtest.h>

#include <cmath>

#include "dnnchaos/constructions.hpp"
#include "dnnchaos/lyapunov.hpp"
#include "dnnchaos/network_io.hpp"

using namespace dnnchaos;
using namespace dnnchaos::constructions;

TEST(TanhChaos, GrowthMeetsDesignedRate) {
  for (auto [A, r] : {std::pair{4.0, 0.5}, std::pair{8.0, 0.5}}) {
    const auto cfg = TanhChaosConfig::make(A, r, 100);
    const auto run = tanh_chaos_run(cfg);
    ASSERT_EQ(run.growth_log.size(), 100u);
    ASSERT_EQ(run.states.size(), 101u);
    const double bound = std::log2(A * (1 - r * r));
    for (double g : run.growth_log) EXPECT_GE(g, bound - 1e-6);
    for (const auto& x : run.states) EXPECT_NEAR(x.norm(), r, 1e-10);
    for (double c : run.conditions) EXPECT_LT(c, 1e6);
  }
}

TEST(TanhChaos, EmittedNetworkReplaysStatesAndGrowth) {
  const auto cfg = TanhChaosConfig::make(4.0, 0.5, 60);
  const auto run = tanh_chaos_run(cfg);
  const auto net = network_from_string(network_to_string(run.network));
  const auto traj = forward_trajectory(net, cfg.x0);
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    EXPECT_LT((traj.states[t] - run.states[t]).norm(), 1e-9) << t;
  }
  // independent check of the tangent growth through the Jacobian product
  const Vector u = jacobian_product(net, cfg.x0) * cfg.u0;
  EXPECT_NEAR(std::log2(u.norm()) / 60.0, run.growth_log.back(), 1e-9);
  // a single finite network whose top exponent is positive
  lyapunov::LyapunovOptions opt;
  opt.burn_in = 0;
  EXPECT_GE(lyapunov::top_exponent(net, cfg.x0, 1, opt, cfg.u0), std::log2(4.0 * 0.75) - 1e-6);
}

TEST(TanhChaos, OutsideTheGrowthRegimeStillRuns) {
  // A(1 - r^2) = 0.76 < 1: the lower bound is negative, construction still valid.
  const auto run = tanh_chaos_run(TanhChaosConfig::make(4.0, 0.9, 100));
  EXPECT_GE(run.growth_log.back(), std::log2(4.0 * (1 - 0.81)) - 1e-6);
}

TEST(TanhChaos, RejectsBadConfigurations) {
  EXPECT_THROW(tanh_chaos_run(TanhChaosConfig::make(1.0, 0.5, 10)), ValidationError);
  EXPECT_THROW(tanh_chaos_run(TanhChaosConfig::make(4.0, 1.0, 10)), ValidationError);
  auto cfg = TanhChaosConfig::make(4.0, 0.5, 10);
  cfg.u0 = cfg.x0;
  EXPECT_THROW(tanh_chaos_run(cfg), DegenerateError);
  cfg = TanhChaosConfig::make(4.0, 0.5, 10);
  cfg.x0 *= 2.0;
  EXPECT_THROW(tanh_chaos_run(cfg), ValidationError);
}

TEST(ReluAngle, NetworkStructure) {
  ReluAngleConfig cfg;
  cfg.T = 70;
  const auto net = relu_angle_network(cfg);
  ASSERT_EQ(net.depth(), 70u);
  Vector x0(2);
  x0 << 1.0, 0.5;
  const auto traj = forward_trajectory(net, x0);
  for (std::size_t t = 1; t <= 70; ++t) {
    EXPECT_EQ(traj.states[t][0], 1.0);
    EXPECT_LT(std::abs(net.layer(t - 1).weights()(1, 1)), cfg.c_bound);
    if (cfg.is_reset(t)) EXPECT_EQ(traj.states[t][1], 0.0) << t;
  }
  EXPECT_TRUE(cfg.is_reset(1));
  EXPECT_TRUE(cfg.is_reset(32));
  EXPECT_TRUE(cfg.is_reset(64));
  EXPECT_FALSE(cfg.is_reset(33));
}

TEST(ReluAngle, GradientFollowsChainRule) {
  ReluAngleConfig cfg;
  cfg.T = 30;
  const auto net = relu_angle_network(cfg);
  Vector x0(2);
  x0 << 1.0, 0.5;
  const auto traj = forward_trajectory(net, x0);
  for (std::size_t T = 2; T <= 30; ++T) {
    // d theta / d x1(0) = a^T * (-x2 / (x1^2 + x2^2)) at layer T, since x2 ignores x1
    const double x1 = traj.states[T][0], x2 = traj.states[T][1];
    const double exact = std::pow(cfg.a, double(T)) * (-x2 / (x1 * x1 + x2 * x2));
    EXPECT_NEAR(angle_gradient(net, x0, T), exact, 1e-5 * std::abs(exact)) << T;
  }
  for (std::size_t T = 5; T < 25; ++T) {
    const double ratio = angle_gradient(net, x0, T + 1) / angle_gradient(net, x0, T);
    EXPECT_NEAR(ratio, 2.0, 0.1) << T;
  }
}

TEST(ReluAngle, DegenerateInputs) {
  ReluAngleConfig cfg;
  cfg.T = 5;
  const auto net = relu_angle_network(cfg);
  Vector x0(2);
  x0 << 0.0, 1.0;
  EXPECT_THROW(angle_gradient(net, x0, 3), DegenerateError);
  x0 << 1.0, 1.0;
  EXPECT_THROW(angle_gradient(net, x0, 6), ValidationError);
  cfg.w22 = 3.0;
  EXPECT_THROW(relu_angle_network(cfg), ValidationError);
  cfg.w22 = 1.0;
  cfg.a = 1.0;
  EXPECT_THROW(relu_angle_network(cfg), ValidationError);
}
