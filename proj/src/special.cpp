#include "emm/special.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

namespace emm {

double digamma(double x) { return boost::math::digamma(x); }

double trigamma(double x) { return boost::math::trigamma(x); }

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / 1.4142135623730950488);
}

double two_sided_p(double z) {
  return std::erfc(std::fabs(z) / 1.4142135623730950488);
}

}  // namespace emm
