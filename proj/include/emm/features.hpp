#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emm/parallel.hpp"
#include "emm/types.hpp"

namespace emm {

struct Typographic {
  int n_chars = 0;
  int n_exclaim = 0;
  int n_question = 0;
  int n_hashtags = 0;
};

// n_chars counts Unicode scalar values after trimming outer whitespace;
// hashtags are '#' immediately followed by an ASCII letter or digit.
Typographic typographic_features(std::string_view text);

enum class Polarity { positive, negative };
using Lexicon = std::unordered_map<std::string, Polarity>;

// Two-column CSV (word,polarity), header optional.
Lexicon load_lexicon_csv(std::istream& in);

// Tokens lowercased and split on non-alphanumeric boundaries, matched exactly
// (no stemming, repeats counted). URLs are stripped before matching.
std::pair<int, int> lexicon_counts(std::string_view text,
                                   const Lexicon& lexicon);

class RetweetRequestDetector {
 public:
  // Patterns are matched case-insensitively as consecutive word tokens, so
  // word boundaries come for free ("RT if" matches "RT, if" but not "cart if").
  explicit RetweetRequestDetector(std::vector<std::string> patterns);

  static std::vector<std::string> default_patterns();
  static RetweetRequestDetector from_file(std::istream& in);

  bool operator()(std::string_view text) const;

 private:
  std::vector<std::vector<std::string>> token_patterns_;
};

bool detect_retweet_request(std::string_view text);  // default pattern set

// Pluggable toxicity source; scores are in [0,1].
class ToxicityScorer {
 public:
  virtual ~ToxicityScorer() = default;
  virtual double score(const RawEntry& entry) const = 0;
};

class ConstantToxicity : public ToxicityScorer {
 public:
  explicit ConstantToxicity(double value);
  double score(const RawEntry&) const override { return value_; }

 private:
  double value_;
};

// Fraction of word tokens found in a flagged-word list.
class WordListToxicity : public ToxicityScorer {
 public:
  explicit WordListToxicity(std::unordered_set<std::string> words)
      : words_(std::move(words)) {}
  double score(const RawEntry& entry) const override;

 private:
  std::unordered_set<std::string> words_;
};

// Reads a precomputed score column (entry_id,score CSV).
class PrecomputedToxicity : public ToxicityScorer {
 public:
  enum class MissingPolicy { error, impute_influencer_mean };

  PrecomputedToxicity(std::istream& csv, MissingPolicy policy,
                      const std::vector<RawEntry>& entries);

  double score(const RawEntry& entry) const override;
  std::size_t imputed() const { return imputed_; }

 private:
  std::unordered_map<std::string, double> scores_;
  std::unordered_map<std::string, double> influencer_mean_;
  double global_mean_ = 0.0;
  MissingPolicy policy_;
  mutable std::size_t imputed_ = 0;
};

struct TemporalControls {
  int hour_of_day = 0;  // 0-23
  int day_of_week = 0;  // 0-6, Monday = 0
};

// Both in UTC; the ingest normalizes timestamps to UTC seconds.
TemporalControls temporal_controls(std::int64_t utc_seconds);

struct FeatureConfig {
  const Lexicon* lexicon = nullptr;                    // required
  const RetweetRequestDetector* detector = nullptr;    // default set if null
  const ToxicityScorer* toxicity = nullptr;            // required
  // Character counts include URLs by default; lexicon counts never do.
  bool strip_urls_in_char_count = false;
};

FeatureVector featurize(const RawEntry& entry, const FeatureConfig& config);

// Joins filtered entries with engagement counts and influencer covariates.
// counts must come from aggregate_engagement over the same entries.
std::vector<AnalysisRow> build_rows(
    const std::vector<RawEntry>& entries,
    const std::unordered_map<std::string, std::int64_t>& counts,
    const std::vector<InfluencerRecord>& influencers,
    const FeatureConfig& config, Execution exec = Execution::parallel);

}  // namespace emm
