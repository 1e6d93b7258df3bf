#include "emm/preprocess.hpp"

#include <istream>
#include <json.hpp>
#include <ostream>
#include <unordered_map>

#include "emm/error.hpp"
#include "emm/stemmer.hpp"
#include "emm/text.hpp"

namespace emm {

using nlohmann::json;

std::size_t Corpus::n_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words{
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
      "your", "yours", "yourself", "yourselves", "he", "him", "his",
      "himself", "she", "her", "hers", "herself", "it", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are",
      "was", "were", "be", "been", "being", "have", "has", "had", "having",
      "do", "does", "did", "doing", "would", "should", "could", "ought",
      "a", "an", "the", "and", "but", "if", "or", "because", "as", "until",
      "while", "of", "at", "by", "for", "with", "about", "against",
      "between", "into", "through", "during", "before", "after", "above",
      "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when",
      "where", "why", "how", "all", "any", "both", "each", "few", "more",
      "most", "other", "some", "such", "no", "nor", "not", "only", "own",
      "same", "so", "than", "too", "very", "s", "t", "can", "will", "just",
      "don", "now", "amp", "rt"};
  return words;
}

std::unordered_set<std::string> load_stopwords(std::istream& in) {
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim_whitespace(line);
    if (!t.empty() && t[0] != '#') out.insert(to_lower(t));
  }
  return out;
}

namespace {

// Strips punctuation and digits from a token, keeping word characters,
// currency signs and emoji.
std::string scrub_token(std::string_view token) {
  std::string out;
  std::size_t pos = 0;
  while (pos < token.size()) {
    const char32_t cp = utf8_next(token, pos);
    if (is_ascii_digit(cp)) continue;
    if (is_word_char(cp) || is_currency(cp) || is_emoji(cp))
      utf8_append(out, cp);
  }
  return out;
}

}  // namespace

std::vector<std::string> preprocess_tokens(std::string_view text,
                                           const PreprocessOptions& opts) {
  std::vector<std::string> out;
  const std::string lowered = to_lower(text);
  for (const auto& raw : whitespace_tokens(lowered)) {
    if (looks_like_url(raw) || looks_like_mention(raw)) continue;
    std::string tok = scrub_token(raw);
    if (tok.empty()) continue;
    if (opts.stopwords.count(tok)) continue;
    if (opts.stem) tok = porter_stem(tok);
    if (tok.empty()) continue;
    out.push_back(std::move(tok));
  }
  return out;
}

Corpus preprocess(const std::vector<std::string>& texts,
                  const std::vector<std::string>& ids,
                  const PreprocessOptions& opts) {
  if (!ids.empty() && ids.size() != texts.size())
    throw Error("preprocess: ids/texts length mismatch");
  Corpus corpus;
  corpus.docs.reserve(texts.size());
  std::unordered_map<std::string, int> index;
  for (std::size_t d = 0; d < texts.size(); ++d) {
    std::vector<int> doc;
    for (auto& tok : preprocess_tokens(texts[d], opts)) {
      auto [it, inserted] =
          index.emplace(tok, static_cast<int>(corpus.vocabulary.size()));
      if (inserted) corpus.vocabulary.push_back(tok);
      doc.push_back(it->second);
    }
    if (doc.empty()) corpus.empty_docs.push_back(d);
    corpus.docs.push_back(std::move(doc));
    corpus.doc_ids.push_back(ids.empty() ? std::to_string(d) : ids[d]);
  }
  return corpus;
}

Corpus subset_corpus(const Corpus& corpus,
                     const std::vector<std::size_t>& doc_indices) {
  Corpus out;
  out.vocabulary = corpus.vocabulary;
  out.docs.reserve(doc_indices.size());
  for (std::size_t d : doc_indices) {
    if (d >= corpus.docs.size()) throw Error("subset_corpus: index out of range");
    if (corpus.docs[d].empty()) out.empty_docs.push_back(out.docs.size());
    out.docs.push_back(corpus.docs[d]);
    out.doc_ids.push_back(corpus.doc_ids[d]);
  }
  return out;
}

void save_corpus_json(std::ostream& out, const Corpus& corpus) {
  const json obj{{"vocabulary", corpus.vocabulary},
                 {"docs", corpus.docs},
                 {"doc_ids", corpus.doc_ids}};
  out << obj.dump() << '\n';
}

Corpus load_corpus_json(std::istream& in) {
  json obj;
  in >> obj;
  Corpus corpus;
  corpus.vocabulary = obj.at("vocabulary").get<std::vector<std::string>>();
  corpus.docs = obj.at("docs").get<std::vector<std::vector<int>>>();
  corpus.doc_ids = obj.at("doc_ids").get<std::vector<std::string>>();
  const int v = static_cast<int>(corpus.vocabulary.size());
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (int id : corpus.docs[d])
      if (id < 0 || id >= v) throw Error("corpus token id out of range");
    if (corpus.docs[d].empty()) corpus.empty_docs.push_back(d);
  }
  return corpus;
}

}  // namespace emm
