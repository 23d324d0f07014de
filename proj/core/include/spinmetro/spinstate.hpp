#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace spinmetro {

using cplx = std::complex<double>;

enum class Axis { x, y, z };

// Pure state of N spin-1/2 particles restricted to the symmetric subspace.
// Amplitudes are stored in the J_z (Dicke) basis, index i <-> m = i - N/2.
class CollectiveState {
 public:
  // Throws InvalidArgument if N < 1, the length is not N+1, or the norm is
  // off by more than 1e-10.
  CollectiveState(int n_particles, Eigen::VectorXcd amplitudes);

  // Same as the constructor but rescales to unit norm first.
  static CollectiveState normalized(int n_particles, Eigen::VectorXcd amplitudes);

  int n_particles() const { return n_; }
  int dim() const { return n_ + 1; }
  double m(int i) const { return i - 0.5 * n_; }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  double norm() const { return amps_.norm(); }

 private:
  int n_;
  Eigen::VectorXcd amps_;
};

// How x/y rotations are carried out.
//   eigenbasis: cached J_x eigendecomposition (O(N^2) memory).
//   chebyshev:  Chebyshev-Bessel expansion of exp(-i theta J_x), O(N) memory.
//   automatic:  eigenbasis for N <= kDenseRotationLimit, chebyshev above.
enum class RotationMethod { automatic, eigenbasis, chebyshev };

inline constexpr int kDenseRotationLimit = 1024;

// Eigendecomposition of the tridiagonal J_x for one N. The J_y eigenbasis is
// obtained as R_z(pi/2) applied to the J_x eigenbasis and is not stored.
class RotationCache {
 public:
  explicit RotationCache(int n_particles);

  // Process-wide registry: builds on first use, keeps entries under a byte
  // budget with least-recently-used eviction. Thread safe.
  static std::shared_ptr<const RotationCache> shared(int n_particles);
  static void set_registry_budget(std::size_t bytes);
  static std::size_t registry_bytes();
  static void clear_registry();

  int n_particles() const { return n_; }
  int dim() const { return n_ + 1; }
  // Eigenvalues as returned by LAPACK, ascending (entry j ~ j - N/2).
  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  // Column j is |J_x = j - N/2> in the J_z basis, real, largest-magnitude
  // component positive.
  const Eigen::MatrixXd& x_basis() const { return vecs_; }
  std::size_t bytes() const;

  // <J_axis = m | psi> for m ascending, from J_z amplitudes. axis=z is identity.
  Eigen::VectorXcd to_basis(const Eigen::VectorXcd& z_amplitudes, Axis axis) const;
  Eigen::VectorXcd from_basis(const Eigen::VectorXcd& axis_amplitudes, Axis axis) const;
  // exp(-i theta J_axis) psi.
  Eigen::VectorXcd rotate(const Eigen::VectorXcd& z_amplitudes, Axis axis, double theta) const;

 private:
  int n_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd vecs_;
};

// exp(-i theta J_axis) psi for axis x or y by Chebyshev expansion.
Eigen::VectorXcd rotate_chebyshev(const Eigen::VectorXcd& z_amplitudes, int n_particles,
                                  Axis axis, double theta);

// |J_x = N/2> expanded in the J_z basis.
CollectiveState coherent_x(int n_particles);

// Gaussian spin-squeezed state, amplitudes proportional to exp(-m^2/(s2 N)).
// For axis=y the Gaussian is placed on the basis R_x(-pi/2)|J_z = m>, which
// has J_y = m.
CollectiveState gss(int n_particles, double s2, Axis axis);

// exp(-i chi J_z^2) psi.
CollectiveState apply_twist(const CollectiveState& state, double chi);

// exp(-i theta J_axis) psi.
CollectiveState apply_rotation(const CollectiveState& state, Axis axis, double theta,
                               RotationMethod method = RotationMethod::automatic);

// p_m = |<J_axis = m|psi>|^2 for m = -N/2 .. N/2, clamped at 0 and summing to 1.
std::vector<double> measurement_distribution(const CollectiveState& state, Axis axis,
                                             RotationMethod method = RotationMethod::automatic);

struct SpherePoint {
  double polar;
  double azimuth;
};

// Husimi Q(polar, azimuth) = |<polar, azimuth|psi>|^2 with the spin coherent
// state pointing along (sin p cos a, sin p sin a, cos p).
std::vector<double> husimi_q(const CollectiveState& state, std::span<const SpherePoint> grid);

// Ladder coefficient sqrt(J(J+1) - m(m+1)) for index i (m = i - N/2).
double ladder_coefficient(int n_particles, int i);

}  // namespace spinmetro
