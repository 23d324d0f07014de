#include "spinmetro/analytic.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "spinmetro/errors.hpp"

namespace spinmetro {

namespace {

constexpr double kBracketLo = 1e-12;
constexpr double kBracketHi = std::numbers::pi;
constexpr double kResidualTol = 1e-12;

void require_positive_n(int n, const char* who) {
  if (n < 1) throw InvalidArgument(std::string(who) + ": N must be >= 1");
}

template <class F>
double bracketed_root(F f, const char* who) {
  const double flo = f(kBracketLo);
  const double fhi = f(kBracketHi);
  if (!(flo < 0.0 && fhi > 0.0)) {
    throw NoRootError(std::string(who) + ": no sign change on (1e-12, pi]", kBracketLo,
                      kBracketHi);
  }
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      f, kBracketLo, kBracketHi, flo, fhi, boost::math::tools::eps_tolerance<double>(), iters);
  double root = std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
  if (std::abs(f(root)) >= kResidualTol) {
    // Polish with a few bisection steps between the two returned ends.
    double a = lo, b = hi;
    for (int k = 0; k < 200 && std::abs(f(root)) >= kResidualTol; ++k) {
      const double mid = 0.5 * (a + b);
      (f(mid) < 0.0 ? a : b) = mid;
      root = std::abs(f(a)) <= std::abs(f(b)) ? a : b;
      if (a == b) break;
    }
  }
  if (std::abs(f(root)) >= kResidualTol) {
    throw NoRootError(std::string(who) + ": residual tolerance not met", lo, hi);
  }
  return root;
}

}  // namespace

TwistedGaussianMoments tg_moments(int n_particles, double s2, double chi) {
  require_positive_n(n_particles, "tg_moments");
  if (!(s2 > 0.0)) throw InvalidArgument("tg_moments: s2 must be positive");
  const double n = n_particles;
  const double u = 1.0 / (s2 * n) + chi * chi * s2 * n;
  TwistedGaussianMoments t;
  t.n_particles = n_particles;
  t.s2 = s2;
  t.chi = chi;
  t.jx_mean = 0.5 * n * std::exp(-0.5 * u);
  t.a_coef = 0.5 * n * (1.0 - std::exp(-2.0 * u)) - s2;
  t.b_coef = 2.0 * chi * s2 * n * std::exp(-0.5 * u);
  const double root = std::hypot(t.a_coef, t.b_coef);
  t.v_plus = n / 8.0 * (2.0 * s2 + t.a_coef + root);
  t.v_minus = n / 8.0 * (2.0 * s2 + t.a_coef - root);
  t.theta_star = 0.5 * std::atan2(t.b_coef, t.a_coef);
  const double w = 1.0 / (s2 * n) + chi * chi * s2 * n;
  t.var_x = n * n / 8.0 * w * w;
  return t;
}

double tg_var_x_full(int n_particles, double s2, double chi) {
  const double n = n_particles;
  const double u = 1.0 / (s2 * n) + chi * chi * s2 * n;
  return n * n / 8.0 * (1.0 + std::exp(-2.0 * u)) - n * n / 4.0 * std::exp(-u);
}

double v_minus_sinh(int n_particles, double s2, double chi) {
  const double n = n_particles;
  const double u = 1.0 / (s2 * n) + chi * chi * s2 * n;
  return n / 4.0 * (s2 - chi * chi * s2 * s2 * n / std::sinh(u));
}

double v_minus_taylor(int n_particles, double s2, double chi) {
  const double n = n_particles;
  const double c2 = chi * chi;
  return s2 * n / 4.0 * (1.0 / (c2 * s2 * s2 * n * n) + c2 * c2 * s2 * s2 * n * n / 6.0);
}

double xibar2_tg(int n_particles, double s2, double chi, double sigma) {
  const double n = n_particles;
  const double u = 1.0 / (s2 * n) + chi * chi * s2 * n;
  const double sg2 = sigma * sigma;
  return (s2 - chi * chi * s2 * s2 * n / std::sinh(u)) +
         0.5 * n * sg2 * (1.0 + std::exp(-2.0 * u)) - n * sg2 * std::exp(-u);
}

double xibar2_tg_taylor(int n_particles, double s2, double chi, double sigma) {
  const double n = n_particles;
  const double c2 = chi * chi;
  const double sg2 = sigma * sigma;
  return 1.0 / (c2 * s2 * n * n) + c2 * c2 * s2 * s2 * s2 * n * n / 6.0 +
         0.5 * sg2 * (1.0 / (s2 * s2 * n) + c2 * c2 * s2 * s2 * n * n * n + 2.0 * c2 * n);
}

double xibar2_gss(int n_particles, double s2, double sigma) {
  return s2 + sigma * sigma / (2.0 * s2 * s2 * n_particles);
}

FlaggedValue chi_star_unrotated(int n_particles, double s2) {
  require_positive_n(n_particles, "chi_star_unrotated");
  if (!(s2 > 0.0)) throw InvalidArgument("chi_star_unrotated: s2 must be positive");
  const double sn = s2 * n_particles;
  return {std::pow(3.0, 1.0 / 6.0) / std::pow(sn, 2.0 / 3.0), sn <= 1.0};
}

double min_variance_star(int n_particles, double s2) {
  return std::cbrt(9.0 * s2 * n_particles) / 8.0;
}

double xi2_min_star(int n_particles, double s2) {
  return std::pow(3.0, 2.0 / 3.0) * std::cbrt(s2) / (2.0 * std::pow(n_particles, 2.0 / 3.0));
}

double state1_residual(int n_particles, double xi2_prev, double chi) {
  const double xn = xi2_prev * n_particles;
  return chi * chi * xn - std::tanh(1.0 / xn + chi * chi * xn);
}

double state3_l_printed(int n_particles, double xi2_prev, double chi) {
  const double n = n_particles;
  const double xn = xi2_prev * n;
  const double u = 1.0 / xn + chi * chi * xn;
  const double coth = std::cosh(u) / std::sinh(u);
  return n * std::sinh(u) / (xi2_prev * coth) * (std::exp(-u) - std::exp(-2.0 * u));
}

double state3_l(int n_particles, double xi2_prev, double chi) {
  const double n = n_particles;
  const double xn = xi2_prev * n;
  const double u = 1.0 / xn + chi * chi * xn;
  // sinh(u) e^{-u} = (1 - e^{-2u})/2 and e^{-u} - e^{-2u} = e^{-u}(1 - e^{-u})
  return n * std::tanh(u) / xi2_prev * 0.5 * (-std::expm1(-2.0 * u)) * (-std::expm1(-u));
}

double state3_residual(int n_particles, double xi2_prev, double carry, double chi) {
  return state1_residual(n_particles, xi2_prev, chi) +
         carry * state3_l(n_particles, xi2_prev, chi);
}

double solve_state1(int n_particles, double xi2_prev) {
  require_positive_n(n_particles, "solve_state1");
  if (!(xi2_prev * n_particles > 1.0)) {
    throw InvalidArgument("solve_state1: requires xi2_prev * N > 1");
  }
  return bracketed_root([&](double c) { return state1_residual(n_particles, xi2_prev, c); },
                        "solve_state1");
}

double solve_state3(int n_particles, double xi2_prev, double carry) {
  require_positive_n(n_particles, "solve_state3");
  if (!(xi2_prev * n_particles > 1.0)) {
    throw InvalidArgument("solve_state3: requires xi2_prev * N > 1");
  }
  if (!(carry >= 0.0)) throw InvalidArgument("solve_state3: carry must be nonnegative");
  if (carry == 0.0) return solve_state1(n_particles, xi2_prev);
  return bracketed_root(
      [&](double c) { return state3_residual(n_particles, xi2_prev, carry, c); },
      "solve_state3");
}

double chi_star_rotated(int n_particles, double s2, double sigma) {
  const double n = n_particles;
  const double denom = (s2 / 3.0 + n * sigma * sigma) * s2 * s2 * s2 * n * n * n * n;
  return std::pow(1.0 / denom, 1.0 / 6.0);
}

RecursionState tg_recursion(int n_particles, double s2, double sigma, int stage) {
  require_positive_n(n_particles, "tg_recursion");
  if (!(s2 * n_particles > 1.0)) throw InvalidArgument("tg_recursion: requires s2 * N > 1");
  const double n = n_particles;
  const double sg2 = sigma * sigma;
  const double a = s2 / 3.0 + n * sg2;
  const double n23 = std::pow(n, 2.0 / 3.0);
  RecursionState r;
  r.stage = stage + 1;
  r.chi_star = chi_star_rotated(n_particles, s2, sigma);
  r.xibar2 = std::cbrt(9.0 * s2 + 27.0 * n * sg2) / (2.0 * n23) + sg2 / (2.0 * s2 * s2 * n) +
             sg2 / (std::cbrt(a) * s2 * std::cbrt(n));
  r.s2 = s2 * (std::cbrt(a) / (s2 * n23) + 1.0 / (6.0 * n23 * std::pow(a, 2.0 / 3.0)));
  return r;
}

double s2_pattern(int j, int n_particles) {
  if (j < 1) throw InvalidArgument("s2_pattern: j must be >= 1");
  const double e = 1.0 - std::pow(3.0, -(j - 1));
  return std::pow(3.0 / (std::pow(2.0, 1.5) * n_particles), e);
}

double chi_pattern(int j, int n_particles) {
  if (j < 1) throw InvalidArgument("chi_pattern: j must be >= 1");
  const double g = 2.0 / std::pow(3.0, j);
  return std::pow(2.0, 1.0 - std::pow(3.0, -(j - 1))) /
         (std::pow(3.0, 0.5 - g) * std::pow(static_cast<double>(n_particles), g));
}

WeaklyNonGaussianOptimum weakly_ng_optimum(int n_particles, double sigma, double w_z) {
  if (n_particles < 1 || !(sigma > 0.0) || !(w_z > 0.0)) {
    throw InvalidArgument("weakly_ng_optimum: inputs must be positive");
  }
  const double n = n_particles;
  const double sw = sigma * sigma * w_z;
  WeaklyNonGaussianOptimum o;
  o.delta_jy2_opt = std::cbrt(n * n * sw / 2.0);
  o.xi2_opt = std::cbrt(32.0 * sw / n);
  o.xibar2_opt = (std::cbrt(32.0) + std::cbrt(1.0 / (16.0 * 64.0 * 64.0))) * std::cbrt(sw / n);
  return o;
}

}  // namespace spinmetro
