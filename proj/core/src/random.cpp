#include "spinmetro/random.hpp"

#include <boost/math/distributions/normal.hpp>

namespace spinmetro {

double standard_normal(std::uint64_t seed, std::uint64_t key, std::uint64_t index) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, uniform_open(seed, key, index));
}

}  // namespace spinmetro
