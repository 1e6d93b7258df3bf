#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emm/preprocess.hpp"

namespace emm {

struct TopicModelFit {
  int k = 0;
  double alpha = 0.1;   // symmetric document-topic prior
  double beta = 0.01;   // symmetric topic-word prior
  Eigen::MatrixXd phi;    // k x V, rows sum to 1
  Eigen::MatrixXd theta;  // D x k, rows sum to 1
  std::uint64_t seed = 0;
  int iterations = 0;
  int burn_in = 0;
  std::vector<std::string> vocabulary;
  std::vector<std::string> doc_ids;
  std::vector<std::string> warnings;
};

// Collapsed Gibbs sampler. phi/theta are averages of the smoothed count
// estimates taken every 10th post-burn-in sweep (at least one accumulation is
// guaranteed). Deterministic given the seed.
TopicModelFit fit_lda(const Corpus& corpus, int k, double alpha, double beta,
                      int n_iterations = 1000, int burn_in = 200,
                      std::uint64_t seed = 1);

void save_fit_json(std::ostream& out, const TopicModelFit& fit);
TopicModelFit load_fit_json(std::istream& in);

}  // namespace emm
