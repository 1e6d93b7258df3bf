#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace emm {

struct Corpus {
  std::vector<std::string> vocabulary;
  std::vector<std::vector<int>> docs;       // token ids per document
  std::vector<std::string> doc_ids;
  std::vector<std::size_t> empty_docs;      // flagged, never dropped

  std::size_t vocab_size() const { return vocabulary.size(); }
  std::size_t n_docs() const { return docs.size(); }
  std::size_t n_tokens() const;
};

struct PreprocessOptions {
  std::unordered_set<std::string> stopwords;
  bool stem = true;
};

std::unordered_set<std::string> load_stopwords(std::istream& in);

// Built-in English stopword list (same content ships in data/stopwords_en.txt).
const std::unordered_set<std::string>& default_stopwords();

// Token pipeline: lowercase, split on whitespace, drop URL and @mention
// tokens, strip punctuation/symbols except currency signs and emoji, drop
// digit characters, drop stopwords and empty tokens, stem.
std::vector<std::string> preprocess_tokens(std::string_view text,
                                           const PreprocessOptions& opts);

Corpus preprocess(const std::vector<std::string>& texts,
                  const std::vector<std::string>& ids,
                  const PreprocessOptions& opts);

// Rebuilds a corpus over a subset of documents, keeping the vocabulary.
Corpus subset_corpus(const Corpus& corpus, const std::vector<std::size_t>& doc_indices);

void save_corpus_json(std::ostream& out, const Corpus& corpus);
Corpus load_corpus_json(std::istream& in);

}  // namespace emm
