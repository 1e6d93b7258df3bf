// Synthetic corpora with known structure for topic-model tests.
#pragma once

#include <string>
#include <vector>

#include "emm/preprocess.hpp"
#include "emm/rng.hpp"

namespace golden {

// Two topics over disjoint vocabulary halves (20 words each); docs_per_topic
// pure documents per topic, tokens_per_doc tokens drawn uniformly from the
// topic's half. True phi is uniform (0.05) over the owned half.
inline emm::Corpus disjoint_two_topic_corpus(int docs_per_topic,
                                             int tokens_per_doc,
                                             std::uint64_t seed) {
  emm::Corpus corpus;
  for (int w = 0; w < 40; ++w)
    corpus.vocabulary.push_back("w" + std::to_string(w));
  emm::Rng rng(seed);
  for (int topic = 0; topic < 2; ++topic) {
    for (int d = 0; d < docs_per_topic; ++d) {
      std::vector<int> doc;
      for (int t = 0; t < tokens_per_doc; ++t)
        doc.push_back(topic * 20 +
                      static_cast<int>(rng.uniform_index(20)));
      corpus.doc_ids.push_back("t" + std::to_string(topic) + "_d" +
                               std::to_string(d));
      corpus.docs.push_back(std::move(doc));
    }
  }
  return corpus;
}

}  // namespace golden
