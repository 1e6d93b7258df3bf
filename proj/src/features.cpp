#include "emm/features.hpp"

#include <cmath>
#include <istream>
#include <stdexcept>

#include "emm/csv.hpp"
#include "emm/error.hpp"
#include "emm/text.hpp"
#include "emm/timeutil.hpp"

namespace emm {

Typographic typographic_features(std::string_view text) {
  Typographic t;
  const std::string_view trimmed = trim_whitespace(text);
  std::size_t pos = 0;
  char32_t prev = 0;
  while (pos < trimmed.size()) {
    const char32_t cp = utf8_next(trimmed, pos);
    ++t.n_chars;
    if (cp == '!') ++t.n_exclaim;
    if (cp == '?') ++t.n_question;
    if (prev == '#' && is_ascii_alnum(cp)) ++t.n_hashtags;
    prev = cp;
  }
  return t;
}

Lexicon load_lexicon_csv(std::istream& in) {
  Lexicon lex;
  CsvReader reader(in);
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() < 2) continue;
    const std::string word = to_lower(trim_whitespace(row[0]));
    const std::string pol = to_lower(trim_whitespace(row[1]));
    if (word.empty() || word == "word") continue;  // header or blank
    if (pol == "positive")
      lex[word] = Polarity::positive;
    else if (pol == "negative")
      lex[word] = Polarity::negative;
  }
  return lex;
}

std::pair<int, int> lexicon_counts(std::string_view text,
                                   const Lexicon& lexicon) {
  if (lexicon.empty()) throw Error("lexicon_counts: empty lexicon");
  int pos = 0, neg = 0;
  for (const auto& tok : word_tokens(text, /*strip_urls=*/true)) {
    const auto it = lexicon.find(tok);
    if (it == lexicon.end()) continue;
    if (it->second == Polarity::positive)
      ++pos;
    else
      ++neg;
  }
  return {pos, neg};
}

RetweetRequestDetector::RetweetRequestDetector(
    std::vector<std::string> patterns) {
  for (const auto& p : patterns) {
    auto toks = word_tokens(p);
    if (!toks.empty()) token_patterns_.push_back(std::move(toks));
  }
  if (token_patterns_.empty())
    throw Error("RetweetRequestDetector: no usable patterns");
}

std::vector<std::string> RetweetRequestDetector::default_patterns() {
  return {"RT if",      "RT this",      "RT to",     "retweet if",
          "retweet this", "retweet to", "please RT", "please retweet"};
}

RetweetRequestDetector RetweetRequestDetector::from_file(std::istream& in) {
  std::vector<std::string> patterns;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim_whitespace(line);
    if (!t.empty() && t[0] != '#') patterns.emplace_back(t);
  }
  return RetweetRequestDetector(std::move(patterns));
}

bool RetweetRequestDetector::operator()(std::string_view text) const {
  const auto toks = word_tokens(text);
  for (const auto& pat : token_patterns_) {
    if (pat.size() > toks.size()) continue;
    for (std::size_t i = 0; i + pat.size() <= toks.size(); ++i) {
      bool match = true;
      for (std::size_t j = 0; j < pat.size(); ++j) {
        if (toks[i + j] != pat[j]) {
          match = false;
          break;
        }
      }
      if (match) return true;
    }
  }
  return false;
}

bool detect_retweet_request(std::string_view text) {
  static const RetweetRequestDetector detector(
      RetweetRequestDetector::default_patterns());
  return detector(text);
}

ConstantToxicity::ConstantToxicity(double value) : value_(value) {
  if (value < 0.0 || value > 1.0)
    throw Error("toxicity outside [0,1]");
}

double WordListToxicity::score(const RawEntry& entry) const {
  const auto toks = word_tokens(entry.text, /*strip_urls=*/true);
  if (toks.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : toks)
    if (words_.count(t)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(toks.size());
}

PrecomputedToxicity::PrecomputedToxicity(std::istream& csv,
                                         MissingPolicy policy,
                                         const std::vector<RawEntry>& entries)
    : policy_(policy) {
  CsvReader reader(csv);
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() < 2) continue;
    if (row[0] == "entry_id" || row[0].empty()) continue;
    const double v = std::stod(row[1]);
    if (v < 0.0 || v > 1.0)
      throw Error("precomputed toxicity outside [0,1]: " + row[0]);
    scores_[row[0]] = v;
  }
  if (policy_ == MissingPolicy::impute_influencer_mean) {
    std::unordered_map<std::string, std::pair<double, std::size_t>> acc;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries) {
      const auto it = scores_.find(e.id);
      if (it == scores_.end()) continue;
      auto& a = acc[e.influencer_id];
      a.first += it->second;
      ++a.second;
      total += it->second;
      ++n;
    }
    for (const auto& [id, a] : acc)
      influencer_mean_[id] = a.first / static_cast<double>(a.second);
    global_mean_ = n ? total / static_cast<double>(n) : 0.0;
  }
}

double PrecomputedToxicity::score(const RawEntry& entry) const {
  const auto it = scores_.find(entry.id);
  if (it != scores_.end()) return it->second;
  if (policy_ == MissingPolicy::error)
    throw Error("missing toxicity score for entry " + entry.id);
  ++imputed_;
  const auto im = influencer_mean_.find(entry.influencer_id);
  return im != influencer_mean_.end() ? im->second : global_mean_;
}

TemporalControls temporal_controls(std::int64_t ts) {
  TemporalControls t;
  t.hour_of_day = static_cast<int>(floor_mod(ts, kSecondsPerDay) / 3600);
  // 1970-01-01 was a Thursday; Monday = 0 puts it at index 3.
  t.day_of_week = static_cast<int>(floor_mod(floor_div(ts, kSecondsPerDay) + 3, 7));
  return t;
}

FeatureVector featurize(const RawEntry& entry, const FeatureConfig& config) {
  if (!config.lexicon) throw Error("featurize: lexicon not configured");
  if (!config.toxicity) throw Error("featurize: toxicity scorer not configured");
  FeatureVector f;
  f.is_quote = entry.kind == EntryKind::quote;
  f.is_reply = entry.kind == EntryKind::reply;
  f.has_url = entry.has_url;
  f.has_image = entry.has_image;
  f.has_video = entry.has_video;
  f.has_gif = entry.has_gif;
  const Typographic t =
      config.strip_urls_in_char_count
          ? typographic_features(strip_url_tokens(entry.text))
          : typographic_features(entry.text);
  f.n_chars = t.n_chars;
  f.n_exclaim = t.n_exclaim;
  f.n_question = t.n_question;
  f.n_hashtags = t.n_hashtags;
  const auto [pos, neg] = lexicon_counts(entry.text, *config.lexicon);
  f.n_positive = pos;
  f.n_negative = neg;
  const double tox = config.toxicity->score(entry);
  if (tox < 0.0 || tox > 1.0)
    throw Error("toxicity scorer returned value outside [0,1]");
  f.toxicity = tox;
  f.requests_retweet = config.detector ? (*config.detector)(entry.text)
                                       : detect_retweet_request(entry.text);
  const TemporalControls tc = temporal_controls(entry.created_at);
  f.hour_of_day = tc.hour_of_day;
  f.day_of_week = tc.day_of_week;
  return f;
}

std::vector<AnalysisRow> build_rows(
    const std::vector<RawEntry>& entries,
    const std::unordered_map<std::string, std::int64_t>& counts,
    const std::vector<InfluencerRecord>& influencers,
    const FeatureConfig& config, Execution exec) {
  std::unordered_map<std::string, const InfluencerRecord*> by_id;
  for (const auto& inf : influencers) by_id[inf.id] = &inf;

  const auto n = static_cast<std::int64_t>(entries.size());
  std::vector<AnalysisRow> rows(entries.size());
  std::exception_ptr failure;

#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const RawEntry& e = entries[static_cast<std::size_t>(i)];
      AnalysisRow& r = rows[static_cast<std::size_t>(i)];
      r.entry_id = e.id;
      r.influencer_id = e.influencer_id;
      r.created_at = e.created_at;
      const auto it = counts.find(e.id);
      r.engagement_count = it != counts.end() ? it->second : 0;
      r.features = featurize(e, config);
      const auto inf = by_id.find(e.influencer_id);
      if (inf != by_id.end()) {
        const InfluencerRecord& rec = *inf->second;
        r.followers_mean_statuses = rec.followers_mean_statuses;
        r.pct_verified_followers = rec.pct_verified_followers;
        const std::int64_t prev_day =
            utc_day_start(e.created_at) - kSecondsPerDay;
        const auto day = rec.follower_count_by_day.find(prev_day);
        if (day != rec.follower_count_by_day.end()) {
          r.n_followers_prev_day = static_cast<double>(day->second);
        } else if (!rec.follower_count_by_day.empty()) {
          // Nearest prior day, falling back to the earliest observation.
          auto ub = rec.follower_count_by_day.upper_bound(prev_day);
          if (ub != rec.follower_count_by_day.begin()) --ub;
          r.n_followers_prev_day = static_cast<double>(ub->second);
        } else {
          r.n_followers_prev_day = std::nan("");
        }
      } else {
        r.n_followers_prev_day = std::nan("");
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace emm
