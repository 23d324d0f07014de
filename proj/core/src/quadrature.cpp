#include "spinmetro/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "spinmetro/errors.hpp"

namespace spinmetro {

std::vector<QuadratureNode> gaussian_prior_rule(int nodes, double sigma, double mean) {
  if (nodes < 1) throw InvalidArgument("gaussian_prior_rule: nodes must be >= 1");
  if (!(sigma >= 0.0)) throw InvalidArgument("gaussian_prior_rule: sigma must be >= 0");
  if (sigma == 0.0) return {{mean, 1.0}};
  // Physicists' weight exp(-x^2) on (-inf, inf): a = 0, b = 1.
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, nodes, 0.0, 1.0, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw InvalidArgument("gaussian_prior_rule: GSL allocation failed");
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  std::vector<QuadratureNode> rule(nodes);
  const double scale = std::sqrt(2.0) * sigma;
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (int q = 0; q < nodes; ++q) rule[q] = {mean + scale * x[q], w[q] * inv_sqrt_pi};
  return rule;
}

}  // namespace spinmetro
