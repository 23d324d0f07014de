#include "spinmetro/spinstate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spinmetro/errors.hpp"

namespace spinmetro {

CollectiveState::CollectiveState(int n_particles, Eigen::VectorXcd amplitudes)
    : n_(n_particles), amps_(std::move(amplitudes)) {
  if (n_ < 1) throw InvalidArgument("CollectiveState: N must be >= 1");
  if (amps_.size() != n_ + 1) {
    throw InvalidArgument("CollectiveState: expected " + std::to_string(n_ + 1) +
                          " amplitudes, got " + std::to_string(amps_.size()));
  }
  const double nrm = amps_.norm();
  if (!std::isfinite(nrm) || std::abs(nrm - 1.0) > 1e-10) {
    throw InvalidArgument("CollectiveState: amplitudes not normalized (norm " +
                          std::to_string(nrm) + ")");
  }
}

CollectiveState CollectiveState::normalized(int n_particles, Eigen::VectorXcd amplitudes) {
  const double nrm = amplitudes.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw InvalidArgument("CollectiveState: cannot normalize a zero or non-finite vector");
  }
  amplitudes /= nrm;
  return CollectiveState(n_particles, std::move(amplitudes));
}

double ladder_coefficient(int n_particles, int i) {
  const double j = 0.5 * n_particles;
  const double m = i - j;
  return std::sqrt(std::max(0.0, j * (j + 1.0) - m * (m + 1.0)));
}

CollectiveState coherent_x(int n_particles) {
  if (n_particles < 1) throw InvalidArgument("coherent_x: N must be >= 1");
  const int n = n_particles;
  Eigen::VectorXcd a(n + 1);
  const double lnf = std::lgamma(n + 1.0);
  const double half_ln2 = 0.5 * n * std::numbers::ln2;
  for (int i = 0; i <= n; ++i) {
    const double lnc = lnf - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    a[i] = std::exp(0.5 * lnc - half_ln2);
  }
  return CollectiveState::normalized(n, std::move(a));
}

CollectiveState gss(int n_particles, double s2, Axis axis) {
  if (n_particles < 1) throw InvalidArgument("gss: N must be >= 1");
  if (!(s2 > 0.0)) throw InvalidArgument("gss: s2 must be positive");
  if (axis == Axis::x) throw InvalidArgument("gss: axis must be y or z");
  const int n = n_particles;
  Eigen::VectorXcd a(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double m = i - 0.5 * n;
    a[i] = std::exp(-m * m / (s2 * n));
  }
  auto z_state = CollectiveState::normalized(n, std::move(a));
  if (axis == Axis::z) return z_state;
  return apply_rotation(z_state, Axis::x, -0.5 * std::numbers::pi);
}

CollectiveState apply_twist(const CollectiveState& state, double chi) {
  const int n = state.n_particles();
  Eigen::VectorXcd a = state.amplitudes();
  for (int i = 0; i <= n; ++i) {
    const double m = state.m(i);
    a[i] *= std::polar(1.0, -chi * m * m);
  }
  return CollectiveState(n, std::move(a));
}

namespace {

bool use_eigenbasis(int n, RotationMethod method) {
  switch (method) {
    case RotationMethod::eigenbasis:
      return true;
    case RotationMethod::chebyshev:
      return false;
    case RotationMethod::automatic:
      break;
  }
  return n <= kDenseRotationLimit;
}

}  // namespace

CollectiveState apply_rotation(const CollectiveState& state, Axis axis, double theta,
                               RotationMethod method) {
  const int n = state.n_particles();
  if (axis == Axis::z) {
    Eigen::VectorXcd a = state.amplitudes();
    for (int i = 0; i <= n; ++i) a[i] *= std::polar(1.0, -theta * state.m(i));
    return CollectiveState(n, std::move(a));
  }
  if (theta == 0.0) return state;
  if (use_eigenbasis(n, method)) {
    auto cache = RotationCache::shared(n);
    return CollectiveState(n, cache->rotate(state.amplitudes(), axis, theta));
  }
  return CollectiveState(n, rotate_chebyshev(state.amplitudes(), n, axis, theta));
}

std::vector<double> measurement_distribution(const CollectiveState& state, Axis axis,
                                             RotationMethod method) {
  const int n = state.n_particles();
  Eigen::VectorXcd b;
  if (axis == Axis::z) {
    b = state.amplitudes();
  } else if (use_eigenbasis(n, method)) {
    b = RotationCache::shared(n)->to_basis(state.amplitudes(), axis);
  } else if (axis == Axis::y) {
    // |<J_y = m|psi>| = |<J_z = m|R_x(pi/2)|psi>|
    b = rotate_chebyshev(state.amplitudes(), n, Axis::x, 0.5 * std::numbers::pi);
  } else {
    // |<J_x = m|psi>| = |<J_z = m|R_y(-pi/2)|psi>|
    b = rotate_chebyshev(state.amplitudes(), n, Axis::y, -0.5 * std::numbers::pi);
  }
  std::vector<double> p(n + 1);
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    p[i] = std::max(0.0, std::norm(b[i]));
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> husimi_q(const CollectiveState& state, std::span<const SpherePoint> grid) {
  const int n = state.n_particles();
  const double j = 0.5 * n;
  const double lnf = std::lgamma(n + 1.0);
  std::vector<double> half_lnc(n + 1);
  for (int i = 0; i <= n; ++i) {
    half_lnc[i] = 0.5 * (lnf - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0));
  }
  const auto& psi = state.amplitudes();
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& pt : grid) {
    const double c = std::abs(std::cos(0.5 * pt.polar));
    const double s = std::abs(std::sin(0.5 * pt.polar));
    const double lc = std::log(c);
    const double ls = std::log(s);
    cplx overlap = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double m = i - j;
      const int up = i;
      const int down = n - i;
      if ((up > 0 && c == 0.0) || (down > 0 && s == 0.0)) continue;
      const double lmag = half_lnc[i] + (up > 0 ? up * lc : 0.0) + (down > 0 ? down * ls : 0.0);
      // conj of exp(-i m azimuth)
      overlap += std::polar(std::exp(lmag), m * pt.azimuth) * psi[i];
    }
    out.push_back(std::clamp(std::norm(overlap), 0.0, 1.0));
  }
  return out;
}

}  // namespace spinmetro
