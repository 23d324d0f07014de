#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spinmetro/spinstate.hpp"

namespace spinmetro {

struct TwistStep {
  double chi = 0;        // signed applied twist (c_applied already included)
  double theta = 0;      // signed x-rotation angle following the twist
  double c_applied = 1;  // fraction of the root actually applied
  double root = 0;       // unscaled root of the twist-angle equation
  double xi2_before = 1; // simulated xi^2 the root was solved at
};

struct TwistSchedule {
  int n_particles = 0;
  int depth = 0;
  double c = 1;
  std::vector<TwistStep> steps;
};

// Which rotation angle follows each twist.
//   post_c: -1/2 atan2(B, A) evaluated at the applied (c-scaled) twist.
//   pre_c:  same, evaluated at the unscaled root.
//   exact_min_variance: minimum-variance angle of the simulated state.
enum class AngleSource { post_c, pre_c, exact_min_variance };

struct ScheduleContext {
  enum class Kind { standalone, chained };
  Kind kind = Kind::standalone;
  double prior_sigma = 0;  // informational
  double carry = 0;        // coefficient of L(chi) in the last root equation

  static ScheduleContext standalone() { return {}; }
  static ScheduleContext chained(double prior_sigma, double carry) {
    return {Kind::chained, prior_sigma, carry};
  }
};

struct ScheduleOptions {
  AngleSource angle = AngleSource::post_c;
  RotationMethod rotation = RotationMethod::automatic;
};

// Builds the twist/rotation circuit for one ensemble of N particles, starting
// from |J_x = N/2>. Each root is solved at the xi^2 of the exactly simulated
// partial circuit. Root failures are rethrown as NoRootError carrying the step.
TwistSchedule build_schedule(int n_particles, int depth, double c,
                             const ScheduleContext& context = ScheduleContext::standalone(),
                             const ScheduleOptions& options = {});

// One twist of c times the optimal single-twist root, followed by the rotation
// onto the narrow direction. Used for twist-strength sweeps.
TwistSchedule build_single_twist(int n_particles, double c, const ScheduleOptions& options = {});

// coherent_x(N) followed by R_x(theta_k) T(chi_k) for each step in order.
CollectiveState prepare_state(const TwistSchedule& schedule,
                              RotationMethod method = RotationMethod::automatic);

// Same circuit applied to a different particle number (angles unchanged).
CollectiveState prepare_state(const TwistSchedule& schedule, int n_particles,
                              RotationMethod method = RotationMethod::automatic);

// Sum of |chi_k| over the steps.
double total_twist(const TwistSchedule& schedule);

// One "key = value" per line; steps as "step k chi theta c_applied".
std::string to_record(const TwistSchedule& schedule);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

// Exponents of the adaptive protocol.
struct ScalingExponents {
  Rational nu(int j) const;     // 2 - 3^{-j}
  Rational mu(int k) const;     // 1 - 3^{-(k-1)}
  Rational gamma(int m) const;  // 2 / 3^m
  Rational alpha(int n) const;  // 1 - 2 / 3^n
  Rational beta(int k) const;   // 1 - 2 / 3^{k-1}
};

ScalingExponents table_exponents();

}  // namespace spinmetro
