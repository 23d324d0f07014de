#pragma once

#include <vector>

namespace spinmetro {

struct QuadratureNode {
  double phi;
  double weight;
};

// Gauss-Hermite rule for a zero-mean normal prior with standard deviation
// sigma: sum_q w_q f(phi_q) ~ E[f(phi)], weights sum to 1.
std::vector<QuadratureNode> gaussian_prior_rule(int nodes, double sigma, double mean = 0.0);

}  // namespace spinmetro
