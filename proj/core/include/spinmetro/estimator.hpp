#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spinmetro/moments.hpp"
#include "spinmetro/schedule.hpp"
#include "spinmetro/spinstate.hpp"

namespace spinmetro {

struct EnsembleSpec {
  int n_particles = 0;
  std::optional<TwistSchedule> schedule;  // empty: unsqueezed |J_x = N/2>
  CollectiveState state;

  static EnsembleSpec unsqueezed(int n_particles);
  static EnsembleSpec squeezed(TwistSchedule schedule,
                               RotationMethod method = RotationMethod::automatic);
};

enum class EstimatorMode { exact, monte_carlo };

struct MonteCarloSettings {
  int samples = 10;        // L
  std::uint64_t seed = 0;
  int first_sampled = 2;   // 1-based ensemble index where sampling starts
  int gaussian_from = 0;   // 1-based index from which the Gaussian approximation is used; 0 = never
};

struct ProtocolSpec {
  std::vector<EnsembleSpec> ensembles;  // measured in order
  double prior_sigma = 0.1;
  double prior_mean = 0.0;
  // Rotation applied before the first ensemble, added to the final estimate.
  double initial_estimate = 0.0;
  int quadrature_nodes = 101;
  EstimatorMode mode = EstimatorMode::exact;
  MonteCarloSettings mc;
  double prune_threshold = 1e-30;  // branches with smaller weight are dropped
  double branch_budget = 1e9;      // cap on accumulated (branch, outcome) terms
  int threads = 1;

  int total_particles() const;
};

struct EstimationResult {
  double delta_phi2 = 0;
  double standard_error = 0;
  std::size_t branches = 0;      // terminal branches (or sample paths)
  double retained_weight = 0;    // probability mass kept after pruning
};

// Sizes for M ensembles; M = 1 returns {N}.
std::vector<int> allocate_ensembles(int n_total, int m);

enum class CarryConvention {
  residual_variance,  // Xi^2_{k-1} / N_{k-1}, the prior variance left for ensemble k
  literal_product     // N_{k-1} * Xi^2_{k-1}
};

struct ProtocolOptions {
  double c = 0.7;
  int single_depth = 1;  // twist count when M = 1
  CarryConvention carry = CarryConvention::residual_variance;
  ScheduleOptions schedule;
  int quadrature_nodes = 101;
  EstimatorMode mode = EstimatorMode::exact;
  MonteCarloSettings mc;
  int threads = 1;
};

// Ensemble k (1-based) gets k-1 twists; the last twist of each squeezed
// ensemble is solved with the carry from the ensembles before it.
ProtocolSpec build_protocol(int n_total, int m, double prior_sigma,
                            const ProtocolOptions& options = {});

// p(m | residual) = |<J_y = m| R_z(residual) |psi>|^2; estimate 2m/N.
std::vector<double> conditional_outcome_dist(const CollectiveState& state, double residual);

// W = a + bx J_x + by J_y + cxx J_x^2 + cyy J_y^2 + cxy {J_x, J_y} on the last ensemble.
struct ErrorOperator {
  int n_particles = 0;
  double a = 0, bx = 0, by = 0, cxx = 0, cyy = 0, cxy = 0;

  double expectation(const MomentSet& m) const;
  double expectation(const CollectiveState& s) const;
  Eigen::MatrixXcd dense() const;
};

// Counter-rotation noise injected after each measured ensemble. Every branch
// splits into `fanout` children; child c of branch b at level j (1-based
// ensemble just measured) has its counter-rotation shifted by offset(j, b, c)
// and weight divided by fanout.
struct CounterRotationNoise {
  int fanout = 1;
  std::function<double(int level, std::size_t branch, int child)> offset;
  // When set the applied (noisy) rotation is also the recorded estimate.
  bool corrupt_estimate = false;
};

ErrorOperator error_operator(const ProtocolSpec& protocol,
                             const CounterRotationNoise* noise = nullptr);
EstimationResult error_exact(const ProtocolSpec& protocol,
                             const CounterRotationNoise* noise = nullptr);
EstimationResult error_monte_carlo(const ProtocolSpec& protocol,
                                   const CounterRotationNoise* noise = nullptr);
// Dispatches on protocol.mode.
EstimationResult estimate_error(const ProtocolSpec& protocol,
                                const CounterRotationNoise* noise = nullptr);

struct OptimizeSettings {
  int max_evaluations = 4000;
  double objective_tolerance = 1e-15;  // absolute change in the best value
  int stall_iterations = 40;
};

struct OptimizedSchedule {
  TwistSchedule schedule;
  double initial_objective = 0;
  double objective = 0;
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead over every (chi_k, theta_k) of the last ensemble's circuit,
// minimizing <psi_M|W_M|psi_M> with W_M built from the earlier ensembles.
OptimizedSchedule optimize_last_ensemble(const ProtocolSpec& protocol,
                                         const TwistSchedule& initial,
                                         const OptimizeSettings& settings = {});

}  // namespace spinmetro
