#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace spinmetro {

struct Point {
  double x;
  double y;
};

struct PowerLawFit {
  double exponent = 0;       // slope of ln y against ln x
  double log_prefactor = 0;  // intercept
  double residual_rms = 0;   // in ln y
  double exponent_stderr = 0;
  int points = 0;
};

// Least squares line through (ln x, ln y).
PowerLawFit powerlaw_fit(std::span<const Point> points);

// K(C) = 3 + P1 e^{P2 C} / (1 + e^{-P3 (C - P4)})
double sigmoid_exp_model(double c, double p1, double p2, double p3, double p4);

struct SigmoidExpFit {
  double p1 = 0, p2 = 0, p3 = 0, p4 = 0;
  bool converged = false;
  double residual_rms = 0;
};

struct SigmoidFitOptions {
  std::vector<double> p4_starts{0.3, 0.6, 0.9, 1.2};
  // When set P3 is held at fixed_p3 instead of fitted.
  bool fix_p3 = false;
  double fixed_p3 = 10.0;
  int max_iterations = 500;
};

// Levenberg-Marquardt from each P4 start; the converged fit with the
// smallest residual wins.
SigmoidExpFit sigmoid_exp_fit(std::span<const Point> points, const SigmoidFitOptions& options = {});

struct NuEstimate {
  double sigma = 0;
  double nu = 0;
  double nu_stderr = 0;
  double n_min = 0;  // fit window
  double n_max = 0;
  int points = 0;
};

struct NuSeries {
  double sigma = 0;
  std::vector<Point> n_vs_error;  // (N, Delta phi^2)
};

// nu = -slope of ln(Delta phi^2) against ln N restricted to [n_min, n_max].
std::vector<NuEstimate> nu_vs_sigma(std::span<const NuSeries> grid, double n_min, double n_max);

}  // namespace spinmetro
