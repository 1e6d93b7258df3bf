#pragma once

#include <Eigen/Core>

namespace emm {

// Gauss-Hermite rule for weight e^{-x^2} (physicists' convention).
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  int order() const { return static_cast<int>(nodes.size()); }
};

// Golub-Welsch on the Jacobi matrix of the Hermite recurrence.
GaussHermiteRule gauss_hermite(int order);

}  // namespace emm
