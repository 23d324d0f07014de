#include <gtest/gtest.h>

#include <spinmetro/errors.hpp>
#include <spinmetro/estimator.hpp>
#include <spinmetro/fitting.hpp>
#include <spinmetro/quadrature.hpp>

#include <cmath>
#include <numbers>

#include "oracle.hpp"

using namespace spinmetro;

namespace {

ProtocolSpec make_protocol(std::vector<EnsembleSpec> ens, double sigma, int nodes = 41) {
  ProtocolSpec p;
  p.ensembles = std::move(ens);
  p.prior_sigma = sigma;
  p.quadrature_nodes = nodes;
  p.prune_threshold = 0.0;
  return p;
}

EnsembleSpec squeezed_after(int n, double prev_variance) {
  return EnsembleSpec::squeezed(
      build_schedule(n, 1, 1.0, ScheduleContext::chained(0.1, prev_variance)));
}

oracle::BruteForce brute(const ProtocolSpec& p) {
  std::vector<oracle::BruteForce::Ensemble> e;
  for (const auto& x : p.ensembles) e.push_back({x.n_particles, x.state.amplitudes()});
  return oracle::BruteForce(e);
}

double rel(double a, double b) { return std::abs(a / b - 1); }

}  // namespace

TEST(Allocate, Rules) {
  EXPECT_EQ(allocate_ensembles(1000, 2), (std::vector<int>{200, 800}));
  EXPECT_EQ(allocate_ensembles(2000, 3), (std::vector<int>{100, 400, 1500}));
  EXPECT_EQ(allocate_ensembles(5000, 4), (std::vector<int>{100, 400, 1200, 3300}));
  EXPECT_EQ(allocate_ensembles(77, 1), (std::vector<int>{77}));
  for (int n : {600, 1234, 9999}) {
    for (int m : {2, 3, 4}) {
      const auto a = allocate_ensembles(n * 3, m);
      int t = 0;
      for (int v : a) t += v;
      EXPECT_EQ(t, n * 3);
    }
  }
}

TEST(Allocate, TooSmallThrows) {
  EXPECT_THROW(allocate_ensembles(60, 4), InvalidAllocation);
  EXPECT_THROW(allocate_ensembles(30, 3), InvalidAllocation);
  EXPECT_THROW(allocate_ensembles(9, 2), InvalidAllocation);
  EXPECT_THROW(allocate_ensembles(1000, 5), InvalidAllocation);
}

TEST(ConditionalOutcome, CoherentSymmetricAndMean) {
  const int n = 120;
  const auto s = coherent_x(n);
  const auto p0 = conditional_outcome_dist(s, 0.0);
  double t = 0;
  for (int i = 0; i <= n; ++i) {
    EXPECT_NEAR(p0[i], p0[n - i], 1e-14);
    t += p0[i];
  }
  EXPECT_NEAR(t, 1.0, 1e-12);
  for (double phi : {0.01, -0.05, 0.2}) {
    const auto p = conditional_outcome_dist(s, phi);
    double mean = 0;
    for (int i = 0; i <= n; ++i) mean += p[i] * 2.0 * (i - 0.5 * n) / n;
    EXPECT_NEAR(mean, std::sin(phi), 1e-9);
  }
}

TEST(ConditionalOutcome, IsRotatedYDistribution) {
  const auto s = prepare_state(build_schedule(300, 2, 0.7));
  for (double r : {0.0, 0.03, -0.4}) {
    const auto a = conditional_outcome_dist(s, r);
    const auto b = measurement_distribution(apply_rotation(s, Axis::z, r), Axis::y);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(ErrorOperator, SingleCoherentEnsembleAtZeroWidth) {
  for (int n : {4, 50, 333}) {
    const auto p = make_protocol({EnsembleSpec::unsqueezed(n)}, 0.0);
    const auto w = error_operator(p);
    EXPECT_NEAR(w.expectation(coherent_x(n)), 1.0 / n, 1e-14);
  }
}

TEST(ErrorOperator, HermitianAndDenseConsistent) {
  const auto p = make_protocol({EnsembleSpec::unsqueezed(10), squeezed_after(20, 0.1)}, 0.1);
  const auto w = error_operator(p);
  const Eigen::MatrixXcd d = w.dense();
  EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  const auto& v = p.ensembles[1].state.amplitudes();
  EXPECT_NEAR(v.dot(d * v).real(), w.expectation(p.ensembles[1].state), 1e-14);
  EXPECT_NEAR(w.expectation(compute_moments(p.ensembles[1].state, false)),
              w.expectation(p.ensembles[1].state), 1e-15);
}

TEST(ErrorOperator, MatchesBruteForceForTwoEnsembles) {
  const auto p = make_protocol({EnsembleSpec::unsqueezed(10), squeezed_after(20, 0.1)}, 0.1);
  const double w = error_operator(p).expectation(p.ensembles[1].state);
  const double b = brute(p).error(0.1, 41);
  EXPECT_LT(rel(w, b), 1e-12) << w << " " << b;
}

TEST(ErrorExact, OracleEquivalenceSmallInstances) {
  struct Case {
    std::vector<EnsembleSpec> ens;
    double sigma;
  };
  std::vector<Case> cases;
  for (int n : {1, 2, 5, 10, 20}) cases.push_back({{EnsembleSpec::unsqueezed(n)}, 0.2});
  cases.push_back({{EnsembleSpec::squeezed(build_schedule(16, 1, 1.0))}, 0.05});
  cases.push_back({{EnsembleSpec::unsqueezed(4), EnsembleSpec::unsqueezed(16)}, 0.3});
  cases.push_back({{EnsembleSpec::unsqueezed(10), squeezed_after(20, 0.1)}, 0.1});
  cases.push_back({{EnsembleSpec::unsqueezed(5), squeezed_after(20, 0.2)}, 0.5});
  cases.push_back({{EnsembleSpec::squeezed(build_schedule(8, 1, 1.0)),
                    EnsembleSpec::squeezed(build_schedule(12, 2, 0.7))},
                   0.2});
  for (auto& c : cases) {
    const auto p = make_protocol(c.ens, c.sigma);
    const double e = error_exact(p).delta_phi2;
    const double b = brute(p).error(c.sigma, 41);
    EXPECT_LT(rel(e, b), 1e-12) << p.ensembles.size() << " " << p.total_particles();
  }
}

TEST(ErrorExact, SingleEnsembleMatchesDirectAverage) {
  const auto p = make_protocol({EnsembleSpec::unsqueezed(10)}, 0.3, 31);
  const double e = error_exact(p).delta_phi2;
  const double b = brute(p).error(0.3, 31);
  EXPECT_LT(rel(e, b), 1e-14);
}

TEST(ErrorExact, StandardQuantumLimit) {
  const auto p = make_protocol({EnsembleSpec::unsqueezed(100)}, 0.01, 101);
  const auto r = error_exact(p);
  EXPECT_NEAR(r.delta_phi2, 0.01, 0.01 * 0.03);
  EXPECT_EQ(r.standard_error, 0.0);
}

TEST(ErrorExact, QuadratureConverged) {
  for (double sigma : {0.1, 0.3, 0.5}) {
    auto p = build_protocol(200, 2, sigma);
    p.quadrature_nodes = 101;
    const double a = error_exact(p).delta_phi2;
    p.quadrature_nodes = 202;
    const double b = error_exact(p).delta_phi2;
    EXPECT_LT(rel(a, b), 1e-8) << sigma;
  }
}

TEST(ErrorExact, CounterRotationInvariance) {
  for (double delta : {0.3, -1.2}) {
    auto p = build_protocol(300, 3, 0.1);
    const double a = error_exact(p).delta_phi2;
    p.prior_mean = delta;
    p.initial_estimate = delta;
    EXPECT_NEAR(error_exact(p).delta_phi2, a, 1e-10 * a);
  }
}

TEST(ErrorExact, FrozenProtocolValues) {
  {
    ProtocolSpec p = make_protocol({EnsembleSpec::unsqueezed(256)}, 0.01, 101);
    p.prune_threshold = 1e-30;
    EXPECT_NEAR(error_exact(p).delta_phi2 * 256, 0.9999, 1e-3);
  }
  EXPECT_NEAR(error_exact(build_protocol(1000, 2, 0.1)).delta_phi2, 4.06521356127e-05, 1e-15);
  ProtocolOptions o;
  o.c = 0.35;
  const auto r = error_exact(build_protocol(2000, 3, 0.1, o));
  EXPECT_NEAR(r.delta_phi2, 5.10824105373e-06, 1e-16);
  EXPECT_EQ(r.branches, 834955u);
}

TEST(ErrorExact, ThreadCountDoesNotChangeBits) {
  auto p = build_protocol(1200, 3, 0.2);
  p.threads = 1;
  const double a = error_exact(p).delta_phi2;
  p.threads = 3;
  EXPECT_EQ(error_exact(p).delta_phi2, a);
}

TEST(ErrorExact, BudgetExceeded) {
  auto p = build_protocol(2000, 3, 0.1);
  p.branch_budget = 1e4;
  EXPECT_THROW(error_exact(p), BudgetExceeded);
}

TEST(ErrorExact, RejectsDecreasingSizes) {
  auto p = make_protocol({EnsembleSpec::unsqueezed(20), EnsembleSpec::unsqueezed(10)}, 0.1);
  EXPECT_THROW(error_exact(p), InvalidArgument);
}

TEST(ErrorExact, PruningKeepsNearlyAllWeight) {
  const auto r = error_exact(build_protocol(2000, 3, 0.1));
  EXPECT_GT(r.retained_weight, 1 - 1e-12);
}

TEST(MonteCarlo, DeterministicAcrossRunsAndThreads) {
  auto p = build_protocol(600, 3, 0.1);
  p.mode = EstimatorMode::monte_carlo;
  p.mc.seed = 99;
  p.threads = 1;
  const auto a = estimate_error(p);
  const auto b = estimate_error(p);
  p.threads = 3;
  const auto c = estimate_error(p);
  EXPECT_EQ(a.delta_phi2, b.delta_phi2);
  EXPECT_EQ(a.delta_phi2, c.delta_phi2);
  EXPECT_EQ(a.standard_error, c.standard_error);
  p.mc.seed = 100;
  EXPECT_NE(estimate_error(p).delta_phi2, a.delta_phi2);
}

TEST(MonteCarlo, UnbiasedOverSeeds) {
  auto p = build_protocol(100, 3, 0.1);
  const double exact = error_exact(p).delta_phi2;
  p.mode = EstimatorMode::monte_carlo;
  double sum = 0, se2 = 0;
  const int seeds = 500;
  for (int s = 0; s < seeds; ++s) {
    p.mc.seed = 1000 + s;
    const auto r = estimate_error(p);
    sum += r.delta_phi2;
    se2 += r.standard_error * r.standard_error;
  }
  const double pooled = std::sqrt(se2) / seeds;
  EXPECT_LT(std::abs(sum / seeds - exact), 3 * pooled) << sum / seeds << " " << exact;
}

TEST(MonteCarlo, GaussianApproximationAgreesWithSampling) {
  auto p = build_protocol(1000, 3, 0.1);
  ASSERT_EQ(p.ensembles[1].n_particles, 200);
  p.mode = EstimatorMode::monte_carlo;
  p.mc.seed = 7;
  const auto a = estimate_error(p);
  p.mc.gaussian_from = 2;
  const auto b = estimate_error(p);
  const double comb = std::hypot(a.standard_error, b.standard_error);
  EXPECT_LT(std::abs(a.delta_phi2 - b.delta_phi2), 2 * comb);
}

TEST(MonteCarlo, FallsBackToExactWithoutSampledLevels) {
  auto p = build_protocol(400, 2, 0.1);
  const double exact = error_exact(p).delta_phi2;
  p.mode = EstimatorMode::monte_carlo;
  p.mc.seed = 3;
  EXPECT_EQ(estimate_error(p).delta_phi2, exact);
}

TEST(Optimize, ImprovesAndIsAFixedPoint) {
  const auto p = build_protocol(300, 2, 0.1);
  const auto& init = *p.ensembles[1].schedule;
  const auto r = optimize_last_ensemble(p, init);
  EXPECT_LE(r.objective, r.initial_objective);
  const auto again = optimize_last_ensemble(p, r.schedule);
  EXPECT_LT(std::abs(again.objective - r.objective), 1e-12);
  EXPECT_LE(again.objective, r.objective);
}

TEST(Optimize, SingleEnsembleScalingAtSmallWidth) {
  std::vector<Point> pts;
  for (int n : {200, 400, 800, 1600}) {
    auto p = build_protocol(n, 1, 0.001);
    const auto r = optimize_last_ensemble(p, *p.ensembles[0].schedule);
    pts.push_back({double(n), r.objective});
  }
  EXPECT_NEAR(-powerlaw_fit(pts).exponent, 5.0 / 3, 0.05);
}

TEST(Quadrature, RuleMatchesGolubWelsch) {
  const auto a = gaussian_prior_rule(31, 0.4, 0.1);
  const auto b = oracle::prior_rule(31, 0.4, 0.1);
  double wsum = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(a[k].phi, b[k].x, 1e-12);
    EXPECT_NEAR(a[k].weight, b[k].w, 1e-14);
    wsum += a[k].weight;
  }
  EXPECT_NEAR(wsum, 1.0, 1e-14);
  const auto z = gaussian_prior_rule(11, 0.0, 0.5);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0].phi, 0.5);
}

TEST(Quadrature, SecondMomentOfPrior) {
  const auto r = gaussian_prior_rule(101, 0.3);
  double m2 = 0, m4 = 0;
  for (const auto& q : r) {
    m2 += q.weight * q.phi * q.phi;
    m4 += q.weight * std::pow(q.phi, 4);
  }
  EXPECT_NEAR(m2, 0.09, 1e-15);
  EXPECT_NEAR(m4, 3 * 0.09 * 0.09, 1e-15);
}
