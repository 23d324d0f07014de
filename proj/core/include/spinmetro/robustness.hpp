#pragma once

#include <cstdint>
#include <functional>

#include "spinmetro/estimator.hpp"
#include "spinmetro/schedule.hpp"

namespace spinmetro {

struct NumberDistribution {
  enum class Kind { delta, poisson, binomial };
  Kind kind = Kind::delta;
  int target_n = 0;
  double p = 0.98;  // binomial success probability; trials = ceil(N / p)

  static NumberDistribution delta(int n) { return {Kind::delta, n, 1.0}; }
  static NumberDistribution poisson(int n) { return {Kind::poisson, n, 1.0}; }
  static NumberDistribution binomial(int n, double p) { return {Kind::binomial, n, p}; }

  int trials() const;
  double mean() const;
  // Draw number `index` of the stream keyed by seed.
  int sample(std::uint64_t seed, std::uint64_t index) const;
};

struct SampleStats {
  double mean = 0;
  double std = 0;  // sample standard deviation
  int samples = 0;
};

// Which squeezing figure of merit is averaged over particle number.
using Xi2Functional = std::function<double(const CollectiveState&)>;

// Prepares the circuit built for N_target at each sampled N_s (angles kept)
// and returns the sample mean and standard deviation of the figure of merit
// (default: Wineland xi^2). Draws below 2 are redrawn up to 100 times.
SampleStats number_fluctuation_xi2(const TwistSchedule& schedule, const NumberDistribution& dist,
                                   int samples, std::uint64_t seed, int threads = 1,
                                   const Xi2Functional& merit = {});

// How the feedback fluctuations r_j are drawn.
//   est1: one replica, L_I samples shared by all branches.
//   est2: L_O replicas with a single shared sample each.
//   est3: independent samples for every branch.
//   est4: L_O replicas of L_I shared samples.
enum class FeedbackEstimator { est1, est2, est3, est4 };

// counter_rotation_only: r_j corrupts only the counter-rotations, the final
// estimate stays the sum of the measured estimates.
// recorded_applied: the noisy applied rotation is also the recorded estimate.
enum class FeedbackModel { counter_rotation_only, recorded_applied };

struct FeedbackNoise {
  double sigma_fb = 0;  // Sigma
  int outer_samples = 10;  // L_O
  int inner_samples = 1;   // L_I
  std::uint64_t seed = 0;
  FeedbackEstimator estimator = FeedbackEstimator::est4;
  FeedbackModel model = FeedbackModel::counter_rotation_only;
};

// Mean Delta phi^2 over replicas and its standard error. Uses the exact
// branch machinery with the noise injected as counter-rotation shifts.
EstimationResult feedback_error(const ProtocolSpec& protocol, const FeedbackNoise& noise);

// xi^2 / C_SC with C_SC = exp(-2 gamma sqrt(N) sum_j |chi_j|).
double contrast_adjusted_xi2(double xi2, const TwistSchedule& schedule, double gamma);
double contrast_factor(const TwistSchedule& schedule, double gamma);

}  // namespace spinmetro
