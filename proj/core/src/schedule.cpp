#include "spinmetro/schedule.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "spinmetro/analytic.hpp"
#include "spinmetro/errors.hpp"
#include "spinmetro/moments.hpp"

namespace spinmetro {

namespace {

double tg_angle(int n, double xi2, double chi_abs) {
  const auto t = tg_moments(n, xi2, chi_abs);
  return -0.5 * std::atan2(t.b_coef, t.a_coef);
}

std::int64_t pow3(int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= 3;
  return r;
}

Rational reduce(std::int64_t num, std::int64_t den) {
  const std::int64_t g = std::gcd(num, den);
  return g == 0 ? Rational{num, den} : Rational{num / g, den / g};
}

void require_index(int j, int lo, const char* who) {
  if (j < lo || j > 30) throw InvalidArgument(std::string(who) + ": index out of range");
}

}  // namespace

TwistSchedule build_schedule(int n_particles, int depth, double c, const ScheduleContext& context,
                             const ScheduleOptions& options) {
  if (n_particles < 2) throw InvalidArgument("build_schedule: N must be >= 2");
  if (depth < 1) throw InvalidArgument("build_schedule: depth must be >= 1");
  if (!(c > 0.0 && c <= 1.0)) throw InvalidArgument("build_schedule: c must lie in (0, 1]");

  TwistSchedule s;
  s.n_particles = n_particles;
  s.depth = depth;
  s.c = c;
  CollectiveState psi = coherent_x(n_particles);
  double xi2 = 1.0;
  for (int k = 1; k <= depth; ++k) {
    const bool last = k == depth;
    double root = 0.0;
    try {
      root = (last && context.kind == ScheduleContext::Kind::chained)
                 ? solve_state3(n_particles, xi2, context.carry)
                 : solve_state1(n_particles, xi2);
    } catch (const NoRootError& e) {
      throw NoRootError(std::string(e.what()) + " (step " + std::to_string(k) + ")",
                        e.bracket_lo(), e.bracket_hi(), k);
    } catch (const InvalidArgument& e) {
      throw NoRootError(std::string(e.what()) + " (step " + std::to_string(k) + ")", 0.0,
                        std::numbers::pi, k);
    }
    const double ck = last ? 1.0 : c;
    const double sgn = (k % 2 == 1) ? 1.0 : -1.0;
    const double chi = sgn * ck * root;
    const CollectiveState twisted = apply_twist(psi, chi);

    double theta = 0.0;
    switch (options.angle) {
      case AngleSource::post_c:
      case AngleSource::pre_c: {
        const double mag = options.angle == AngleSource::post_c ? ck * root : root;
        theta = tg_angle(n_particles, xi2, mag);
        if (last) theta += 0.5 * std::numbers::pi;
        theta *= sgn;
        break;
      }
      case AngleSource::exact_min_variance: {
        const double t = min_variance_angle(compute_moments(twisted, false)).theta;
        // Intermediate steps leave the narrow direction along z for the next twist.
        theta = last ? t : (t > 0.0 ? t - 0.5 * std::numbers::pi : t + 0.5 * std::numbers::pi);
        break;
      }
    }

    psi = apply_rotation(twisted, Axis::x, theta, options.rotation);
    s.steps.push_back({chi, theta, ck, root, xi2});
    if (!last) xi2 = optimal_xi2(compute_moments(psi, false));
  }
  return s;
}

TwistSchedule build_single_twist(int n_particles, double c, const ScheduleOptions& options) {
  if (n_particles < 2) throw InvalidArgument("build_single_twist: N must be >= 2");
  if (!(c > 0.0)) throw InvalidArgument("build_single_twist: c must be positive");
  const double root = solve_state1(n_particles, 1.0);
  const double chi = c * root;
  double theta = 0.0;
  if (options.angle == AngleSource::exact_min_variance) {
    theta = min_variance_angle(compute_moments(apply_twist(coherent_x(n_particles), chi), false))
                .theta;
  } else {
    const double mag = options.angle == AngleSource::post_c ? chi : root;
    theta = tg_angle(n_particles, 1.0, mag) + 0.5 * std::numbers::pi;
  }
  TwistSchedule s;
  s.n_particles = n_particles;
  s.depth = 1;
  s.c = c;
  s.steps.push_back({chi, theta, c, root, 1.0});
  return s;
}

CollectiveState prepare_state(const TwistSchedule& schedule, RotationMethod method) {
  return prepare_state(schedule, schedule.n_particles, method);
}

CollectiveState prepare_state(const TwistSchedule& schedule, int n_particles,
                              RotationMethod method) {
  CollectiveState psi = coherent_x(n_particles);
  for (const auto& st : schedule.steps) {
    psi = apply_rotation(apply_twist(psi, st.chi), Axis::x, st.theta, method);
  }
  return psi;
}

double total_twist(const TwistSchedule& schedule) {
  double t = 0.0;
  for (const auto& st : schedule.steps) t += std::abs(st.chi);
  return t;
}

std::string to_record(const TwistSchedule& schedule) {
  std::ostringstream os;
  os.precision(17);
  os << "n_particles = " << schedule.n_particles << '\n'
     << "depth = " << schedule.depth << '\n'
     << "c = " << schedule.c << '\n';
  for (std::size_t k = 0; k < schedule.steps.size(); ++k) {
    const auto& st = schedule.steps[k];
    os << "step " << k + 1 << ' ' << st.chi << ' ' << st.theta << ' ' << st.c_applied << '\n';
  }
  return os.str();
}

Rational ScalingExponents::nu(int j) const {
  require_index(j, 0, "nu");
  const auto d = pow3(j);
  return reduce(2 * d - 1, d);
}

Rational ScalingExponents::mu(int k) const {
  require_index(k, 1, "mu");
  const auto d = pow3(k - 1);
  return reduce(d - 1, d);
}

Rational ScalingExponents::gamma(int m) const {
  require_index(m, 0, "gamma");
  return reduce(2, pow3(m));
}

Rational ScalingExponents::alpha(int n) const {
  require_index(n, 0, "alpha");
  const auto d = pow3(n);
  return reduce(d - 2, d);
}

Rational ScalingExponents::beta(int k) const {
  require_index(k, 1, "beta");
  const auto d = pow3(k - 1);
  return reduce(d - 2, d);
}

ScalingExponents table_exponents() { return {}; }

}  // namespace spinmetro
