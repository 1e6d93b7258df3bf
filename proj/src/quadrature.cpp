#include "emm/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "emm/error.hpp"

namespace emm {

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw Error("gauss_hermite: order must be >= 1");
  GaussHermiteRule rule;
  if (order == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(M_PI));
    return rule;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double b = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  rule.nodes = es.eigenvalues();
  rule.weights.resize(order);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights(i) = sqrt_pi * v0 * v0;
  }
  return rule;
}

}  // namespace emm
