#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <list>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "spinmetro/errors.hpp"
#include "spinmetro/spinstate.hpp"

namespace spinmetro {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

// diag(exp(i * sign * pi/2 * m)); sign = -1 is R_z(pi/2).
Eigen::VectorXcd z_quarter_phase(int n, double sign) {
  Eigen::VectorXcd u(n + 1);
  for (int i = 0; i <= n; ++i) u[i] = std::polar(1.0, sign * kHalfPi * (i - 0.5 * n));
  return u;
}

Eigen::MatrixXd split(const Eigen::VectorXcd& v) {
  Eigen::MatrixXd ri(v.size(), 2);
  ri.col(0) = v.real();
  ri.col(1) = v.imag();
  return ri;
}

Eigen::VectorXcd join(const Eigen::MatrixXd& ri) {
  Eigen::VectorXcd v(ri.rows());
  v.real() = ri.col(0);
  v.imag() = ri.col(1);
  return v;
}

struct Registry {
  std::mutex mu;
  std::list<std::pair<int, std::shared_ptr<const RotationCache>>> lru;
  std::size_t budget = std::size_t{1536} << 20;
  std::size_t bytes = 0;
};

Registry& registry() {
  static Registry r;
  return r;
}

void evict_locked(Registry& r) {
  while (r.bytes > r.budget && r.lru.size() > 1) {
    r.bytes -= r.lru.back().second->bytes();
    r.lru.pop_back();
  }
}

}  // namespace

RotationCache::RotationCache(int n_particles) : n_(n_particles) {
  if (n_ < 1) throw InvalidArgument("RotationCache: N must be >= 1");
  const int n = n_ + 1;
  std::vector<double> d(n, 0.0);
  std::vector<double> e(n, 0.0);
  for (int i = 0; i + 1 < n; ++i) e[i] = 0.5 * ladder_coefficient(n_, i);
  evals_.resize(n);
  vecs_.resize(n, n);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'A', n, d.data(), e.data(), 0.0, 0.0, 0, 0, 0.0,
                     &found, evals_.data(), vecs_.data(), n, isuppz.data());
  if (info != 0 || found != n) {
    throw std::runtime_error("RotationCache: dstevr failed for N=" + std::to_string(n_) +
                             " (info " + std::to_string(info) + ")");
  }
  for (int j = 0; j < n; ++j) {
    if (std::abs(evals_[j] - (j - 0.5 * n_)) > 1e-6) {
      throw std::runtime_error("RotationCache: J_x spectrum off the integer ladder for N=" +
                               std::to_string(n_));
    }
    Eigen::Index k = 0;
    vecs_.col(j).cwiseAbs().maxCoeff(&k);
    if (vecs_(k, j) < 0.0) vecs_.col(j) *= -1.0;
  }
}

std::size_t RotationCache::bytes() const {
  return sizeof(double) * static_cast<std::size_t>(vecs_.size() + evals_.size());
}

Eigen::VectorXcd RotationCache::to_basis(const Eigen::VectorXcd& z_amplitudes, Axis axis) const {
  switch (axis) {
    case Axis::z:
      return z_amplitudes;
    case Axis::x:
      return join(vecs_.transpose() * split(z_amplitudes));
    case Axis::y: {
      const Eigen::VectorXcd u = z_quarter_phase(n_, +1.0);
      const Eigen::VectorXcd w = u.cwiseProduct(z_amplitudes);
      return join(vecs_.transpose() * split(w));
    }
  }
  return z_amplitudes;
}

Eigen::VectorXcd RotationCache::from_basis(const Eigen::VectorXcd& axis_amplitudes,
                                           Axis axis) const {
  switch (axis) {
    case Axis::z:
      return axis_amplitudes;
    case Axis::x:
      return join(vecs_ * split(axis_amplitudes));
    case Axis::y: {
      const Eigen::VectorXcd u = z_quarter_phase(n_, -1.0);
      return u.cwiseProduct(join(vecs_ * split(axis_amplitudes)));
    }
  }
  return axis_amplitudes;
}

Eigen::VectorXcd RotationCache::rotate(const Eigen::VectorXcd& z_amplitudes, Axis axis,
                                       double theta) const {
  if (axis == Axis::z) {
    Eigen::VectorXcd a = z_amplitudes;
    for (int i = 0; i <= n_; ++i) a[i] *= std::polar(1.0, -theta * (i - 0.5 * n_));
    return a;
  }
  Eigen::VectorXcd b = to_basis(z_amplitudes, axis);
  for (int j = 0; j <= n_; ++j) b[j] *= std::polar(1.0, -theta * (j - 0.5 * n_));
  return from_basis(b, axis);
}

std::shared_ptr<const RotationCache> RotationCache::shared(int n_particles) {
  Registry& r = registry();
  {
    std::lock_guard lock(r.mu);
    for (auto it = r.lru.begin(); it != r.lru.end(); ++it) {
      if (it->first == n_particles) {
        r.lru.splice(r.lru.begin(), r.lru, it);
        return r.lru.front().second;
      }
    }
  }
  auto built = std::make_shared<const RotationCache>(n_particles);
  std::lock_guard lock(r.mu);
  for (auto& [n, c] : r.lru) {
    if (n == n_particles) return c;
  }
  r.lru.emplace_front(n_particles, built);
  r.bytes += built->bytes();
  evict_locked(r);
  return built;
}

void RotationCache::set_registry_budget(std::size_t bytes) {
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  r.budget = bytes;
  evict_locked(r);
}

std::size_t RotationCache::registry_bytes() {
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  return r.bytes;
}

void RotationCache::clear_registry() {
  Registry& r = registry();
  std::lock_guard lock(r.mu);
  r.lru.clear();
  r.bytes = 0;
}

namespace {

// J_k(a) for k = 0..K by Miller's backward recurrence normalized with
// J_0 + 2 sum J_2k = 1; trailing terms below 1e-18 are dropped.
std::vector<double> bessel_sequence(double a) {
  const int start = static_cast<int>(a + 60.0 * std::cbrt(a) + 60.0);
  std::vector<double> f(start + 2, 0.0);
  f[start] = 1e-280;
  for (int k = start; k >= 1; --k) {
    f[k - 1] = (2.0 * k / a) * f[k] - f[k + 1];
    if (std::abs(f[k - 1]) > 1e250) {
      for (int q = k - 1; q <= start; ++q) f[q] *= 1e-250;
    }
  }
  double norm = f[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * f[k];
  for (double& v : f) v /= norm;
  int last = start;
  while (last > 0 && std::abs(f[last]) < 1e-18) --last;
  f.resize(last + 1);
  return f;
}

}  // namespace

Eigen::VectorXcd rotate_chebyshev(const Eigen::VectorXcd& z_amplitudes, int n_particles,
                                  Axis axis, double theta) {
  const int n = n_particles;
  if (z_amplitudes.size() != n + 1) throw InvalidArgument("rotate_chebyshev: size mismatch");
  if (axis == Axis::z) {
    Eigen::VectorXcd a = z_amplitudes;
    for (int i = 0; i <= n; ++i) a[i] *= std::polar(1.0, -theta * (i - 0.5 * n));
    return a;
  }
  if (axis == Axis::y) {
    // exp(-i theta J_y) = R_z(pi/2) exp(-i theta J_x) R_z(pi/2)^dagger
    const Eigen::VectorXcd w = z_quarter_phase(n, +1.0).cwiseProduct(z_amplitudes);
    return z_quarter_phase(n, -1.0).cwiseProduct(rotate_chebyshev(w, n, Axis::x, theta));
  }

  // exp(-i 2 pi J_x) = (-1)^N, so reduce theta to [-pi, pi].
  const double two_pi = 2.0 * std::numbers::pi;
  const double turns = std::nearbyint(theta / two_pi);
  double th = theta - turns * two_pi;
  const bool flip = (n % 2 != 0) && (static_cast<long long>(turns) % 2 != 0);
  if (th == 0.0) return flip ? Eigen::VectorXcd(-z_amplitudes) : z_amplitudes;

  const double jmax = 0.5 * n;
  const double a = std::abs(th) * jmax;
  const std::vector<double> bess = bessel_sequence(a);
  // exp(-i a x) = J_0(a) + 2 sum_k (-i)^k J_k(a) T_k(x); theta < 0 conjugates.
  const cplx step = th > 0 ? cplx(0.0, -1.0) : cplx(0.0, 1.0);

  std::vector<double> off(n);
  for (int i = 0; i < n; ++i) off[i] = 0.5 * ladder_coefficient(n, i) / jmax;
  auto apply_h = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd& out) {
    out[0] = off[0] * v[1];
    for (int i = 1; i < n; ++i) out[i] = off[i - 1] * v[i - 1] + off[i] * v[i + 1];
    out[n] = off[n - 1] * v[n - 1];
  };

  Eigen::VectorXcd t_prev = z_amplitudes;
  Eigen::VectorXcd t_cur(n + 1);
  Eigen::VectorXcd t_next(n + 1);
  Eigen::VectorXcd result = bess[0] * t_prev;
  if (bess.size() > 1) {
    apply_h(t_prev, t_cur);
    cplx phase = step;
    result += (2.0 * bess[1]) * phase * t_cur;
    for (std::size_t k = 2; k < bess.size(); ++k) {
      apply_h(t_cur, t_next);
      t_next = 2.0 * t_next - t_prev;
      phase *= step;
      result += (2.0 * bess[k]) * phase * t_next;
      std::swap(t_prev, t_cur);
      std::swap(t_cur, t_next);
    }
  }
  if (flip) result = -result;
  return result;
}

}  // namespace spinmetro
