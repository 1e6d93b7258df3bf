#include "emm/nb.hpp"

#include <cmath>

#include "emm/error.hpp"

namespace emm {

double nb_log_pmf(double y, double mu, double theta) {
  if (!(mu > 0.0)) throw Error("nb_log_pmf: mu must be positive");
  if (!(theta > 0.0)) throw Error("nb_log_pmf: theta must be positive");
  if (y < 0.0 || std::floor(y) != y)
    throw Error("nb_log_pmf: y must be a nonnegative integer");
  // -theta*log1p(mu/theta) stays accurate in the Poisson limit theta >> mu.
  return std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) -
         theta * std::log1p(mu / theta) +
         y * (std::log(mu) - std::log(theta + mu));
}

}  // namespace emm
