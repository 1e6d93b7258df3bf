#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emm/lda.hpp"
#include "emm/parallel.hpp"
#include "emm/preprocess.hpp"

namespace emm {

struct HeldOutReport {
  std::size_t oov_dropped = 0;     // held-out tokens missing from fit vocab
  std::size_t tokens_scored = 0;
};

// Document-completion estimator: the first floor(n/2) tokens of each held-out
// document estimate its topic weights (EM fold-in against phi); the remainder
// is scored as sum over tokens of log sum_k theta_k phi_kw. Returns the total
// over documents.
double held_out_loglik(const TopicModelFit& fit, const Corpus& held_out,
                       HeldOutReport* report = nullptr);

// UMass coherence per topic over the top_n most probable words, computed on
// the given corpus: sum over ranked pairs of log((codoc(m,l)+1)/doc(l)).
std::vector<double> coherence(const TopicModelFit& fit, const Corpus& corpus,
                              int top_n = 5);

struct CvRow {
  int k = 0;
  int fold = 0;
  double held_out_loglik = 0.0;
  double mean_coherence = 0.0;
};

struct LdaRunOptions {
  int n_iterations = 1000;
  int burn_in = 200;
  int coherence_top_n = 5;
};

// Deterministic shuffled round-robin fold assignment from the seed; one fit
// per (k, fold); rows sorted by k then fold.
std::vector<CvRow> cross_validate(const Corpus& corpus,
                                  const std::vector<int>& k_grid, double alpha,
                                  double beta, int folds, std::uint64_t seed,
                                  const LdaRunOptions& run = {},
                                  Execution exec = Execution::parallel);

std::vector<std::size_t> fold_assignment(std::size_t n_docs, int folds,
                                         std::uint64_t seed);

struct IntrusionItem {
  int topic = 0;
  std::array<std::string, 6> words;
  int intruder_pos = 0;  // index into words (the answer key)
};

// Five most probable words per topic plus one intruder drawn from the bottom
// decile of the topic that ranks in some other topic's top decile (when k = 1
// any bottom-decile word outside the top five qualifies).
std::vector<IntrusionItem> intrusion_items(const TopicModelFit& fit,
                                           const Corpus& corpus,
                                           std::uint64_t seed);

struct MergedTopics {
  std::vector<std::string> labels;  // dominant merged label per document
  std::vector<double> masses;      // its summed theta mass
};

// Unlabeled topics map to "unlabeled". Assignment is always the argmax;
// masses let callers flag low-confidence documents against a threshold.
MergedTopics merge_topics(const TopicModelFit& fit,
                          const std::map<int, std::string>& mapping);

}  // namespace emm
