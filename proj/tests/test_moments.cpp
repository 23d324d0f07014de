#include <gtest/gtest.h>

#include <boost/math/tools/minima.hpp>

#include <spinmetro/analytic.hpp>
#include <spinmetro/errors.hpp>
#include <spinmetro/moments.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"

using namespace spinmetro;

namespace {

constexpr double kPi = std::numbers::pi;

CollectiveState twisted(int n, double chi, double theta) {
  return apply_rotation(apply_twist(coherent_x(n), chi), Axis::x, theta);
}

double var_along(const CollectiveState& s, double t) {
  // Var[sin(t) J_z - cos(t) J_y]
  const auto m = compute_moments(s, false);
  const double vy = m.var_y(), vz = m.var_z();
  return std::sin(t) * std::sin(t) * vz + std::cos(t) * std::cos(t) * vy -
         2 * std::sin(t) * std::cos(t) * m.cov_yz;
}

}  // namespace

TEST(Moments, CoherentX) {
  for (int n : {4, 101, 2500}) {
    const auto m = compute_moments(coherent_x(n));
    EXPECT_NEAR(m.jx, n / 2.0, 1e-9 * n);
    EXPECT_NEAR(m.jy2, n / 4.0, 1e-9 * n);
    EXPECT_NEAR(m.jz2, n / 4.0, 1e-9 * n);
  }
}

TEST(Moments, MatchDenseOperators) {
  const int n = 16;
  const auto ops = oracle::spin_ops(n);
  const auto s = apply_rotation(twisted(n, 0.2, 0.6), Axis::y, 0.25);
  const auto& v = s.amplitudes();
  const auto m = compute_moments(s);
  EXPECT_NEAR(m.jx, oracle::expect(ops.jx, v), 1e-12);
  EXPECT_NEAR(m.jy, oracle::expect(ops.jy, v), 1e-12);
  EXPECT_NEAR(m.jz, oracle::expect(ops.jz, v), 1e-12);
  EXPECT_NEAR(m.jx2, oracle::expect(ops.jx * ops.jx, v), 1e-11);
  EXPECT_NEAR(m.jy2, oracle::expect(ops.jy * ops.jy, v), 1e-11);
  EXPECT_NEAR(m.jz2, oracle::expect(ops.jz * ops.jz, v), 1e-11);
  const oracle::Mat yz = 0.5 * (ops.jy * ops.jz + ops.jz * ops.jy);
  EXPECT_NEAR(m.cov_yz, oracle::expect(yz, v) - m.jy * m.jz, 1e-11);
  const oracle::Mat xy = 0.5 * (ops.jx * ops.jy + ops.jy * ops.jx);
  EXPECT_NEAR(m.sym_xy, oracle::expect(xy, v), 1e-11);
  const oracle::Mat y2 = ops.jy * ops.jy;
  const oracle::Mat z2 = ops.jz * ops.jz;
  EXPECT_NEAR(m.jy4, oracle::expect(y2 * y2, v), 1e-9);
  EXPECT_NEAR(m.jz4, oracle::expect(z2 * z2, v), 1e-9);
}

TEST(Moments, CasimirAndVarianceBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 20; ++k) {
    const int n = 10 + 37 * k;
    const auto s = apply_rotation(twisted(n, u(rng) * 0.1, u(rng) * 3), Axis::y, u(rng));
    const auto m = compute_moments(s);
    EXPECT_NEAR(m.jx2 + m.jy2 + m.jz2, 0.25 * n * (n + 2.0), 1e-8 * n * n);
    EXPECT_GE(m.jy2, m.jy * m.jy - 1e-9);
    EXPECT_GE(m.jz2, m.jz * m.jz - 1e-9);
  }
}

TEST(Wineland, OptimalSingleTwistNear1000) {
  // Best xi^2 over the twist strength with the exact minimum-variance rotation.
  const int n = 1000;
  const auto f = [&](double chi) {
    return optimal_xi2(compute_moments(apply_twist(coherent_x(n), chi), false));
  };
  const auto best = boost::math::tools::brent_find_minima(f, 0.002, 0.05, 40);
  const double target = std::pow(3.0, 2.0 / 3) / (2 * std::pow(1000.0, 2.0 / 3));
  EXPECT_NEAR(target, 0.0104, 1e-4);
  EXPECT_LT(std::abs(best.second / target - 1), 0.15) << best.second;
}

TEST(Wineland, PositiveAndDegenerate) {
  const auto s = twisted(80, 0.05, 0.3);
  EXPECT_GT(wineland_xi2(compute_moments(s)), 0.0);
  Eigen::VectorXcd dicke = Eigen::VectorXcd::Zero(11);
  dicke[5] = 1.0;
  const auto m = compute_moments(CollectiveState(10, dicke));
  EXPECT_THROW(wineland_xi2(m), DegenerateOrientation);
  EXPECT_THROW(rotated_xibar2(m, 0.1), DegenerateOrientation);
}

TEST(RotatedXibar2, ZeroSigmaIsWineland) {
  const auto m = compute_moments(twisted(300, 0.02, 0.4));
  EXPECT_DOUBLE_EQ(rotated_xibar2(m, 0.0), wineland_xi2(m));
}

TEST(RotatedXibar2, CoherentStateIsOneForAnySigma) {
  const auto m = compute_moments(coherent_x(500));
  for (double s : {0.0, 0.1, 1.0, 5.0}) EXPECT_NEAR(rotated_xibar2(m, s), 1.0, 1e-10);
}

TEST(RotatedXibar2, TwistedGaussianMatchesClosedForm) {
  // Prior variance 1/N, the width left by an unsqueezed preliminary ensemble.
  const int n = 2000;
  const double sigma = std::sqrt(1.0 / n);
  const double chi = chi_star_rotated(n, 1.0, sigma);
  const auto tw = apply_twist(gss(n, 1.0, Axis::z), chi);
  const double th = min_variance_angle(compute_moments(tw, false)).theta;
  const auto m = compute_moments(apply_rotation(tw, Axis::x, th), false);
  const double sim = rotated_xibar2(m, sigma);
  EXPECT_LT(std::abs(xibar2_tg(n, 1.0, chi, sigma) / sim - 1), 0.10);
}

TEST(RotatedXibar2, MonotoneInSigma) {
  const auto m = compute_moments(twisted(700, 0.01, 1.3));
  double prev = 0;
  for (double s = 0; s < 1; s += 0.05) {
    const double v = rotated_xibar2(m, s);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(MinVarianceAngle, UntwistedGaussianIsZero) {
  const auto r = min_variance_angle(compute_moments(gss(200, 2.0, Axis::z)));
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.theta, 0.0, 1e-12);
}

TEST(MinVarianceAngle, FlipsWithTwistSign) {
  for (double chi : {0.01, 0.03, 0.2}) {
    const double a = min_variance_angle(compute_moments(apply_twist(coherent_x(150), chi))).theta;
    const double b = min_variance_angle(compute_moments(apply_twist(coherent_x(150), -chi))).theta;
    EXPECT_NEAR(a, -b, 1e-12);
  }
}

TEST(MinVarianceAngle, LocalMinimum) {
  const auto s = apply_twist(coherent_x(1000), 0.012);
  const double t = min_variance_angle(compute_moments(s)).theta;
  EXPECT_LE(var_along(s, t), var_along(s, t + 0.01));
  EXPECT_LE(var_along(s, t), var_along(s, t - 0.01));
}

TEST(MinVarianceAngle, RotationOntoJyMinimizesItsVariance) {
  const auto s = apply_twist(coherent_x(400), 0.03);
  const double t = min_variance_angle(compute_moments(s)).theta;
  const double vy = compute_moments(apply_rotation(s, Axis::x, t)).var_y();
  EXPECT_NEAR(vy, min_variance(compute_moments(s)), 1e-8);
  for (double d : {-0.05, 0.05}) {
    EXPECT_LT(vy, compute_moments(apply_rotation(s, Axis::x, t + d)).var_y());
  }
}

TEST(MinVarianceAngle, BeatsDenseGridOnRandomTwistedStates) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> nd(8, 300);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 100; ++k) {
    const int n = nd(rng);
    auto s = apply_twist(coherent_x(n), u(rng) * 0.5);
    s = apply_rotation(s, Axis::x, u(rng) * kPi);
    s = apply_twist(s, u(rng) * 0.1);
    const double t = min_variance_angle(compute_moments(s)).theta;
    double grid_min = 1e300;
    for (int g = 0; g < 1000; ++g) grid_min = std::min(grid_min, var_along(s, kPi * g / 1000));
    EXPECT_LE(var_along(s, t), grid_min + 1e-9) << k;
  }
}

TEST(MinVarianceAngle, IsotropicIsFlagged) {
  MomentSet m;
  m.n_particles = 10;
  m.jx = 5;
  m.jy2 = m.jz2 = 2.5;
  const auto r = min_variance_angle(m);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.theta, 0.0);
}

TEST(Kurtosis, CoherentZIsBinomial) {
  for (int n : {2, 10, 99, 1000}) {
    EXPECT_NEAR(kurtosis(coherent_x(n), Axis::z), 3.0 - 2.0 / n, 1e-10) << n;
  }
}

TEST(Kurtosis, GaussianLimit) {
  for (int n : {200, 400, 1600, 3200}) {
    EXPECT_NEAR(kurtosis(gss(n, 1.0, Axis::z), Axis::z), 3.0, 0.06) << n;
    EXPECT_NEAR(kurtosis(gss(n, 0.3, Axis::z), Axis::z), 3.0, 0.06) << n;
  }
}

TEST(Kurtosis, AtLeastOne) {
  for (double chi : {0.0, 0.05, 0.3, 1.0}) {
    for (Axis a : {Axis::y, Axis::z}) EXPECT_GE(kurtosis(twisted(60, chi, 0.9), a), 1.0);
  }
}

TEST(Kurtosis, ZeroVarianceThrows) {
  Eigen::VectorXcd dicke = Eigen::VectorXcd::Zero(9);
  dicke[2] = 1.0;
  EXPECT_THROW(kurtosis(CollectiveState(8, dicke), Axis::z), UndefinedKurtosis);
}
