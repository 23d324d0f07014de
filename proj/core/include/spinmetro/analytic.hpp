#pragma once

namespace spinmetro {

// Closed-form moments of T(chi)|GSS(s)>_z (Gaussian/Holstein-Primakoff limit).
struct TwistedGaussianMoments {
  int n_particles = 0;
  double s2 = 0;
  double chi = 0;
  double jx_mean = 0;
  double a_coef = 0;
  double b_coef = 0;
  double v_plus = 0;
  double v_minus = 0;
  double theta_star = 0;  // 1/2 atan2(B, A)
  double var_x = 0;       // (N^2/8)(1/(s^2 N) + chi^2 s^2 N)^2
};

TwistedGaussianMoments tg_moments(int n_particles, double s2, double chi);

// Exact (unexpanded) Delta J_x^2 = N^2/8 (1 + e^{-2u}) - N^2/4 e^{-u}, u = 1/(s^2N) + chi^2 s^2 N.
double tg_var_x_full(int n_particles, double s2, double chi);

// Successive approximations of the minimal variance.
double v_minus_sinh(int n_particles, double s2, double chi);
double v_minus_taylor(int n_particles, double s2, double chi);

// Rotated squeezing parameter: moment form and fully expanded form.
double xibar2_tg(int n_particles, double s2, double chi, double sigma);
double xibar2_tg_taylor(int n_particles, double s2, double chi, double sigma);
// Initial GSS value s^2 + sigma^2/(2 s^4 N).
double xibar2_gss(int n_particles, double s2, double sigma);

struct FlaggedValue {
  double value = 0;
  bool out_of_regime = false;
};

// 3^{1/6} / (s^2 N)^{2/3}; flagged when s^2 N <= 1.
FlaggedValue chi_star_unrotated(int n_particles, double s2);

// (9 s^2 N)^{1/3} / 8
double min_variance_star(int n_particles, double s2);

// 3^{2/3} s^{2/3} / (2 N^{2/3})
double xi2_min_star(int n_particles, double s2);

// Root chi > 0 of chi^2 xi^2 N - tanh(1/(xi^2 N) + chi^2 xi^2 N) on (1e-12, pi].
double solve_state1(int n_particles, double xi2_prev);

// As solve_state1 with the extra term carry * L(chi).
double solve_state3(int n_particles, double xi2_prev, double carry);

// Left-hand sides, exposed for residual checks.
double state1_residual(int n_particles, double xi2_prev, double chi);
double state3_residual(int n_particles, double xi2_prev, double carry, double chi);

// L(chi) as printed (sinh/coth form; overflows for large u) and the
// algebraically identical stable form used by the solver.
double state3_l_printed(int n_particles, double xi2_prev, double chi);
double state3_l(int n_particles, double xi2_prev, double chi);

struct RecursionState {
  int stage = 1;
  double s2 = 0;        // effective GSS width after the twist
  double xibar2 = 0;    // optimal rotated squeezing after the twist
  double chi_star = 0;  // rotated-optimal twist
};

// One step of the rotated-squeezing recursion starting from s2 at `stage`.
RecursionState tg_recursion(int n_particles, double s2, double sigma, int stage = 1);

// [1 / ((s^2/3 + N sigma^2) s^6 N^4)]^{1/6}
double chi_star_rotated(int n_particles, double s2, double sigma);

// s_j^2 = (3/(2^{3/2} N))^{1 - 3^{-(j-1)}}
double s2_pattern(int j, int n_particles);
// chi_{j*} = 2^{1 - 3^{-(j-1)}} / (3^{1/2 - 2/3^j} N^{2/3^j})
double chi_pattern(int j, int n_particles);

struct WeaklyNonGaussianOptimum {
  double delta_jy2_opt = 0;
  double xi2_opt = 0;
  double xibar2_opt = 0;
};

WeaklyNonGaussianOptimum weakly_ng_optimum(int n_particles, double sigma, double w_z);

}  // namespace spinmetro
