#include "spinmetro/robustness.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/policies/policy.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "spinmetro/errors.hpp"
#include "spinmetro/moments.hpp"
#include "spinmetro/parallel.hpp"
#include "spinmetro/random.hpp"

namespace spinmetro {

namespace {

using RoundUp = boost::math::policies::policy<
    boost::math::policies::discrete_quantile<boost::math::policies::integer_round_up>>;

constexpr int kMaxRedraws = 100;

}  // namespace

int NumberDistribution::trials() const {
  return static_cast<int>(std::ceil(static_cast<double>(target_n) / p - 1e-12));
}

double NumberDistribution::mean() const {
  switch (kind) {
    case Kind::delta:
    case Kind::poisson:
      return target_n;
    case Kind::binomial:
      return p * trials();
  }
  return target_n;
}

int NumberDistribution::sample(std::uint64_t seed, std::uint64_t index) const {
  const double u = uniform_open(seed, 0x4e554d42ULL, index);
  switch (kind) {
    case Kind::delta:
      return target_n;
    case Kind::poisson: {
      const boost::math::poisson_distribution<double, RoundUp> d(target_n);
      return static_cast<int>(boost::math::quantile(d, u));
    }
    case Kind::binomial: {
      const boost::math::binomial_distribution<double, RoundUp> d(trials(), p);
      return static_cast<int>(boost::math::quantile(d, u));
    }
  }
  return target_n;
}

SampleStats number_fluctuation_xi2(const TwistSchedule& schedule, const NumberDistribution& dist,
                                   int samples, std::uint64_t seed, int threads,
                                   const Xi2Functional& merit) {
  if (samples < 1) throw InvalidArgument("number_fluctuation_xi2: samples must be >= 1");
  if (dist.kind == NumberDistribution::Kind::binomial && !(dist.p > 0.0 && dist.p <= 1.0)) {
    throw InvalidArgument("number_fluctuation_xi2: binomial p must lie in (0, 1]");
  }
  auto value = [&](const CollectiveState& s) {
    return merit ? merit(s) : wineland_xi2(compute_moments(s, false));
  };
  std::vector<double> v(samples);
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    int n = 0;
    for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
      n = dist.sample(seed, i * (kMaxRedraws + 1) + attempt);
      if (n >= 2) break;
    }
    if (n < 2) {
      throw InvalidArgument("number_fluctuation_xi2: could not draw N_s >= 2 after " +
                            std::to_string(kMaxRedraws) + " redraws");
    }
    v[i] = value(prepare_state(schedule, n));
  });
  SampleStats st;
  st.samples = samples;
  for (double x : v) st.mean += x;
  st.mean /= samples;
  if (samples > 1) {
    double s = 0.0;
    for (double x : v) s += (x - st.mean) * (x - st.mean);
    st.std = std::sqrt(s / (samples - 1));
  }
  return st;
}

EstimationResult feedback_error(const ProtocolSpec& protocol, const FeedbackNoise& noise) {
  if (protocol.ensembles.size() < 2) throw InvalidArgument("feedback_error: needs M >= 2");
  if (!(noise.sigma_fb >= 0.0)) throw InvalidArgument("feedback_error: Sigma must be >= 0");
  if (noise.outer_samples < 1 || noise.inner_samples < 1) {
    throw InvalidArgument("feedback_error: L_O and L_I must be >= 1");
  }
  int outer = noise.outer_samples;
  int inner = noise.inner_samples;
  bool per_branch = false;
  switch (noise.estimator) {
    case FeedbackEstimator::est1:
      outer = 1;
      break;
    case FeedbackEstimator::est2:
      inner = 1;
      break;
    case FeedbackEstimator::est3:
      outer = 1;
      per_branch = true;
      break;
    case FeedbackEstimator::est4:
      break;
  }
  const double sig = noise.sigma_fb;
  const std::uint64_t seed = noise.seed;
  std::vector<double> values(outer);
  std::size_t branches = 0;
  double weight = 0.0;
  for (int o = 0; o < outer; ++o) {
    CounterRotationNoise hook;
    hook.fanout = inner;
    hook.corrupt_estimate = noise.model == FeedbackModel::recorded_applied;
    const auto replica = static_cast<std::uint64_t>(o);
    if (per_branch) {
      hook.offset = [=](int level, std::size_t branch, int child) {
        const std::uint64_t key = hash_combine(hash_combine(replica, level), branch);
        return sig * standard_normal(seed, key, static_cast<std::uint64_t>(child));
      };
    } else {
      hook.offset = [=](int level, std::size_t, int child) {
        const std::uint64_t key = hash_combine(replica, static_cast<std::uint64_t>(level));
        return sig * standard_normal(seed, key, static_cast<std::uint64_t>(child));
      };
    }
    const EstimationResult r = estimate_error(protocol, &hook);
    values[o] = r.delta_phi2;
    branches += r.branches;
    weight += r.retained_weight;
  }
  EstimationResult out;
  for (double x : values) out.delta_phi2 += x;
  out.delta_phi2 /= outer;
  if (outer > 1) {
    double s = 0.0;
    for (double x : values) s += (x - out.delta_phi2) * (x - out.delta_phi2);
    out.standard_error = std::sqrt(s / (outer - 1) / outer);
  }
  out.branches = branches;
  out.retained_weight = weight / outer;
  return out;
}

double contrast_factor(const TwistSchedule& schedule, double gamma) {
  if (!(gamma >= 0.0)) throw InvalidArgument("contrast_factor: gamma must be >= 0");
  return std::exp(-2.0 * gamma * std::sqrt(static_cast<double>(schedule.n_particles)) *
                  total_twist(schedule));
}

double contrast_adjusted_xi2(double xi2, const TwistSchedule& schedule, double gamma) {
  return xi2 / contrast_factor(schedule, gamma);
}

}  // namespace spinmetro
