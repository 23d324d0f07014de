#pragma once

#include "spinmetro/spinstate.hpp"

namespace spinmetro {

struct MomentSet {
  int n_particles = 0;
  double jx = 0, jy = 0, jz = 0;
  double jx2 = 0, jy2 = 0, jz2 = 0;
  // 1/2 <{J_y, J_z}> - <J_y><J_z>
  double cov_yz = 0;
  // 1/2 <{J_x, J_y}> and 1/2 <{J_y, J_z}>
  double sym_xy = 0;
  double sym_yz = 0;
  // Raw fourth moments <J_y^4>, <J_z^4>; NaN unless requested.
  double jy4 = 0, jz4 = 0;

  double var_x() const { return jx2 - jx * jx; }
  double var_y() const { return jy2 - jy * jy; }
  double var_z() const { return jz2 - jz * jz; }
};

// First and second moments from ladder sums; fourth moments (J_y needs a
// basis change) only when with_fourth is set.
MomentSet compute_moments(const CollectiveState& state, bool with_fourth = true);

// N (<J_y^2> - <J_y>^2) / <J_x>^2
double wineland_xi2(const MomentSet& m);

// N / <J_x>^2 * [dJ_y^2 + sigma^2 dJ_x^2]
double rotated_xibar2(const MomentSet& m, double sigma);

struct MinVarianceAngle {
  double theta = 0.0;
  bool degenerate = false;
};

// theta* = 1/2 atan2(2 cov_yz, dJ_z^2 - dJ_y^2). With R_x(theta) = exp(-i theta J_x),
// applying R_x(theta*) brings the minimum-variance direction onto J_y, i.e.
// theta* minimizes Var[sin(t) J_z - cos(t) J_y].
MinVarianceAngle min_variance_angle(const MomentSet& m);

// Smallest variance over J(t) = sin(t) J_z - cos(t) J_y.
double min_variance(const MomentSet& m);

// N * min_variance / <J_x>^2: the xi^2 reached after the best x-rotation.
double optimal_xi2(const MomentSet& m);

// <(J_axis - <J_axis>)^4> / (dJ_axis^2)^2 for axis y or z.
double kurtosis(const CollectiveState& state, Axis axis);

}  // namespace spinmetro
