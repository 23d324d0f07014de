#include "spinmetro/fitting.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>

#include <cmath>
#include <limits>
#include <memory>

#include "spinmetro/errors.hpp"

namespace spinmetro {

PowerLawFit powerlaw_fit(std::span<const Point> points) {
  if (points.size() < 3) throw InvalidArgument("powerlaw_fit: needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0)) throw InvalidArgument("powerlaw_fit: nonpositive input");
    mx += std::log(p.x);
    my += std::log(p.y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.y) - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("powerlaw_fit: all x values coincide");
  PowerLawFit f;
  f.points = static_cast<int>(points.size());
  f.exponent = sxy / sxx;
  f.log_prefactor = my - f.exponent * mx;
  double ssr = 0.0;
  for (const auto& p : points) {
    const double r = std::log(p.y) - (f.log_prefactor + f.exponent * std::log(p.x));
    ssr += r * r;
  }
  f.residual_rms = std::sqrt(ssr / n);
  f.exponent_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  return f;
}

double sigmoid_exp_model(double c, double p1, double p2, double p3, double p4) {
  return 3.0 + p1 * std::exp(p2 * c) / (1.0 + std::exp(-p3 * (c - p4)));
}

namespace {

struct SigmoidData {
  std::span<const Point> points;
  bool fix_p3;
  double p3;
};

void unpack(const gsl_vector* x, const SigmoidData& d, double& p1, double& p2, double& p3,
            double& p4) {
  p1 = gsl_vector_get(x, 0);
  p2 = gsl_vector_get(x, 1);
  if (d.fix_p3) {
    p3 = d.p3;
    p4 = gsl_vector_get(x, 2);
  } else {
    p3 = gsl_vector_get(x, 2);
    p4 = gsl_vector_get(x, 3);
  }
}

int sigmoid_f(const gsl_vector* x, void* params, gsl_vector* f) {
  const auto& d = *static_cast<const SigmoidData*>(params);
  double p1, p2, p3, p4;
  unpack(x, d, p1, p2, p3, p4);
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    gsl_vector_set(f, i, sigmoid_exp_model(d.points[i].x, p1, p2, p3, p4) - d.points[i].y);
  }
  return GSL_SUCCESS;
}

int sigmoid_df(const gsl_vector* x, void* params, gsl_matrix* j) {
  const auto& d = *static_cast<const SigmoidData*>(params);
  double p1, p2, p3, p4;
  unpack(x, d, p1, p2, p3, p4);
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    const double c = d.points[i].x;
    const double g = std::exp(p2 * c);
    const double s = 1.0 / (1.0 + std::exp(-p3 * (c - p4)));
    const double ds = s * (1.0 - s);
    gsl_matrix_set(j, i, 0, g * s);
    gsl_matrix_set(j, i, 1, p1 * c * g * s);
    std::size_t col = 2;
    if (!d.fix_p3) gsl_matrix_set(j, i, col++, p1 * g * ds * (c - p4));
    gsl_matrix_set(j, i, col, -p1 * g * ds * p3);
  }
  return GSL_SUCCESS;
}

}  // namespace

SigmoidExpFit sigmoid_exp_fit(std::span<const Point> points, const SigmoidFitOptions& options) {
  if (points.size() < 8) throw InvalidArgument("sigmoid_exp_fit: needs at least 8 points");
  const std::size_t np = options.fix_p3 ? 3 : 4;
  SigmoidData data{points, options.fix_p3, options.fixed_p3};

  gsl_error_handler_t* old_handler = gsl_set_error_handler_off();
  SigmoidExpFit best;
  best.residual_rms = std::numeric_limits<double>::infinity();
  bool have_any = false;
  for (double p4_start : options.p4_starts) {
    gsl_multifit_nlinear_fdf fdf{};
    fdf.f = &sigmoid_f;
    fdf.df = &sigmoid_df;
    fdf.n = points.size();
    fdf.p = np;
    fdf.params = &data;
    gsl_multifit_nlinear_parameters fp = gsl_multifit_nlinear_default_parameters();
    std::unique_ptr<gsl_multifit_nlinear_workspace, decltype(&gsl_multifit_nlinear_free)> w(
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fp, points.size(), np),
        &gsl_multifit_nlinear_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x0(gsl_vector_alloc(np),
                                                               &gsl_vector_free);
    gsl_vector_set(x0.get(), 0, 0.5);
    gsl_vector_set(x0.get(), 1, 1.0);
    if (options.fix_p3) {
      gsl_vector_set(x0.get(), 2, p4_start);
    } else {
      gsl_vector_set(x0.get(), 2, 10.0);
      gsl_vector_set(x0.get(), 3, p4_start);
    }
    gsl_multifit_nlinear_init(x0.get(), &fdf, w.get());
    int info = 0;
    const int status = gsl_multifit_nlinear_driver(options.max_iterations, 1e-14, 1e-14, 0.0,
                                                   nullptr, nullptr, &info, w.get());
    const gsl_vector* x = gsl_multifit_nlinear_position(w.get());
    const gsl_vector* f = gsl_multifit_nlinear_residual(w.get());
    const double rms = gsl_blas_dnrm2(f) / std::sqrt(static_cast<double>(points.size()));
    if (!std::isfinite(rms)) continue;
    const bool ok = status == GSL_SUCCESS;
    // Converged fits always beat unconverged ones.
    const bool better = !have_any || (ok && !best.converged) ||
                        (ok == best.converged && rms < best.residual_rms);
    if (better) {
      have_any = true;
      unpack(x, data, best.p1, best.p2, best.p3, best.p4);
      best.residual_rms = rms;
      best.converged = ok;
    }
  }
  gsl_set_error_handler(old_handler);
  return best;
}

std::vector<NuEstimate> nu_vs_sigma(std::span<const NuSeries> grid, double n_min, double n_max) {
  if (!(n_min <= n_max)) throw InvalidArgument("nu_vs_sigma: empty fit window");
  std::vector<NuEstimate> out;
  out.reserve(grid.size());
  for (const auto& row : grid) {
    std::vector<Point> pts;
    for (const auto& p : row.n_vs_error) {
      if (p.x >= n_min && p.x <= n_max) pts.push_back(p);
    }
    const PowerLawFit f = powerlaw_fit(pts);
    NuEstimate e;
    e.sigma = row.sigma;
    e.nu = -f.exponent;
    e.nu_stderr = f.exponent_stderr;
    e.n_min = n_min;
    e.n_max = n_max;
    e.points = f.points;
    out.push_back(e);
  }
  return out;
}

}  // namespace spinmetro
