#pragma once

namespace emm {

double digamma(double x);
double trigamma(double x);

// P(Z <= z) for standard normal Z.
double normal_cdf(double z);
// Two-sided Wald p-value, 2 * (1 - Phi(|z|)).
double two_sided_p(double z);

}  // namespace emm
