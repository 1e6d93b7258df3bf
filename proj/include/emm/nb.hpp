#pragma once

namespace emm {

// NB2 log pmf with dispersion theta (Var = mu + mu^2/theta):
// lgamma(y+theta) - lgamma(theta) - lgamma(y+1)
//   + theta*log(theta/(theta+mu)) + y*log(mu/(theta+mu)).
double nb_log_pmf(double y, double mu, double theta);

}  // namespace emm
