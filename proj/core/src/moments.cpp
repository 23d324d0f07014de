#include "spinmetro/moments.hpp"

#include <cmath>
#include <limits>

#include "spinmetro/errors.hpp"

namespace spinmetro {

MomentSet compute_moments(const CollectiveState& state, bool with_fourth) {
  const int n = state.n_particles();
  const auto& a = state.amplitudes();
  const double j = 0.5 * n;
  const double casimir = j * (j + 1.0);

  cplx jp = 0.0;    // <J_+>
  cplx jp2 = 0.0;   // <J_+^2>
  cplx jpz = 0.0;   // <{J_+, J_z}>
  double z1 = 0.0, z2 = 0.0, z4 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double m = i - j;
    const double p = std::norm(a[i]);
    z1 += p * m;
    z2 += p * m * m;
    z4 += p * m * m * m * m;
    if (i + 1 <= n) {
      const double c = ladder_coefficient(n, i);
      const cplx t = std::conj(a[i + 1]) * a[i] * c;
      jp += t;
      jpz += t * (2.0 * m + 1.0);
      if (i + 2 <= n) jp2 += std::conj(a[i + 2]) * a[i] * c * ladder_coefficient(n, i + 1);
    }
  }

  MomentSet out;
  out.n_particles = n;
  out.jx = jp.real();
  out.jy = jp.imag();
  out.jz = z1;
  out.jz2 = z2;
  const double perp = casimir - z2;  // <J_x^2 + J_y^2>
  out.jx2 = 0.5 * (perp + jp2.real());
  out.jy2 = 0.5 * (perp - jp2.real());
  out.sym_xy = 0.5 * jp2.imag();
  out.sym_yz = 0.5 * jpz.imag();
  out.cov_yz = out.sym_yz - out.jy * out.jz;
  out.jz4 = z4;
  out.jy4 = std::numeric_limits<double>::quiet_NaN();
  if (with_fourth) {
    const auto py = measurement_distribution(state, Axis::y);
    double y4 = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double m = i - j;
      y4 += py[i] * m * m * m * m;
    }
    out.jy4 = y4;
  }
  return out;
}

double wineland_xi2(const MomentSet& m) {
  if (m.jx == 0.0) throw DegenerateOrientation("wineland_xi2: <J_x> = 0");
  return m.n_particles * m.var_y() / (m.jx * m.jx);
}

double rotated_xibar2(const MomentSet& m, double sigma) {
  if (m.jx == 0.0) throw DegenerateOrientation("rotated_xibar2: <J_x> = 0");
  if (sigma < 0.0) throw InvalidArgument("rotated_xibar2: sigma must be nonnegative");
  return m.n_particles / (m.jx * m.jx) * (m.var_y() + sigma * sigma * m.var_x());
}

MinVarianceAngle min_variance_angle(const MomentSet& m) {
  const double tol = 1e-12 * static_cast<double>(m.n_particles) * m.n_particles;
  const double num = 2.0 * m.cov_yz;
  const double den = m.var_z() - m.var_y();
  if (std::abs(num) <= tol && std::abs(den) <= tol) return {0.0, true};
  return {0.5 * std::atan2(num, den), false};
}

double min_variance(const MomentSet& m) {
  const double vy = m.var_y();
  const double vz = m.var_z();
  const double c = m.cov_yz;
  return 0.5 * (vy + vz - std::sqrt((vz - vy) * (vz - vy) + 4.0 * c * c));
}

double optimal_xi2(const MomentSet& m) {
  if (m.jx == 0.0) throw DegenerateOrientation("optimal_xi2: <J_x> = 0");
  return m.n_particles * min_variance(m) / (m.jx * m.jx);
}

double kurtosis(const CollectiveState& state, Axis axis) {
  if (axis == Axis::x) throw InvalidArgument("kurtosis: axis must be y or z");
  const int n = state.n_particles();
  const auto p = measurement_distribution(state, axis);
  double mean = 0.0;
  for (int i = 0; i <= n; ++i) mean += p[i] * (i - 0.5 * n);
  double v2 = 0.0, v4 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double d = (i - 0.5 * n) - mean;
    const double d2 = d * d;
    v2 += p[i] * d2;
    v4 += p[i] * d2 * d2;
  }
  if (!(v2 > 1e-300)) throw UndefinedKurtosis("kurtosis: zero variance along axis");
  return v4 / (v2 * v2);
}

}  // namespace spinmetro
