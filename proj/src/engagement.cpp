#include "emm/engagement.hpp"

#include <cmath>
#include <ostream>

#include "emm/csv.hpp"
#include "emm/error.hpp"
#include "emm/timeutil.hpp"

namespace emm {

std::vector<RawEntry> filter_original(const std::vector<RawEntry>& entries,
                                      std::int64_t window_end,
                                      int window_days) {
  const std::int64_t cutoff = window_end - window_days * kSecondsPerDay;
  std::vector<RawEntry> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.kind == EntryKind::retweet) continue;
    if (e.created_at > cutoff) continue;
    out.push_back(e);
  }
  return out;
}

EngagementTally aggregate_engagement(const std::vector<RawEntry>& entries,
                                     const std::vector<EngagementEvent>& events,
                                     int window_days,
                                     std::int64_t skew_slack_seconds) {
  EngagementTally tally;
  std::unordered_map<std::string, std::int64_t> created;
  created.reserve(entries.size());
  tally.counts.reserve(entries.size());
  for (const auto& e : entries) {
    created.emplace(e.id, e.created_at);
    tally.counts.emplace(e.id, 0);
  }
  const std::int64_t window = window_days * kSecondsPerDay;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::mention) {
      ++tally.mentions;
      continue;
    }
    const auto it = created.find(ev.target_entry_id);
    if (it == created.end()) {
      ++tally.orphans;
      continue;
    }
    const std::int64_t delta = ev.created_at - it->second;
    if (delta < -skew_slack_seconds || delta > window) {
      ++tally.orphans;
      continue;
    }
    ++tally.counts[ev.target_entry_id];
  }
  return tally;
}

double pearson_correlation(std::span<const double> x,
                           std::span<const double> y) {
  if (x.size() != y.size())
    throw Error("pearson_correlation: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw Error("pearson_correlation: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error("pearson_correlation: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<InfluencerSummary> summarize_influencers(
    const std::vector<AnalysisRow>& rows,
    const std::vector<InfluencerRecord>& influencers) {
  if (rows.empty()) throw Error("summarize_influencers: no rows");

  struct Acc {
    std::int64_t n = 0, posts = 0, quotes = 0, replies = 0;
    std::int64_t media = 0, urls = 0;
    double tox_sum = 0.0, tox_sq = 0.0;
    double engagement_sum = 0.0;
  };
  std::unordered_map<std::string, Acc> acc;
  for (const auto& r : rows) {
    Acc& a = acc[r.influencer_id];
    ++a.n;
    switch (r.kind()) {
      case EntryKind::post: ++a.posts; break;
      case EntryKind::quote: ++a.quotes; break;
      case EntryKind::reply: ++a.replies; break;
      case EntryKind::retweet: break;  // excluded upstream
    }
    if (r.features.has_image || r.features.has_video || r.features.has_gif)
      ++a.media;
    if (r.features.has_url) ++a.urls;
    a.tox_sum += r.features.toxicity;
    a.tox_sq += r.features.toxicity * r.features.toxicity;
    a.engagement_sum += static_cast<double>(r.engagement_count);
  }

  std::vector<InfluencerSummary> out;
  out.reserve(influencers.size());
  for (const auto& inf : influencers) {
    InfluencerSummary s;
    s.influencer_id = inf.id;
    s.display_name = inf.display_name;
    s.verified = inf.verified;
    const auto it = acc.find(inf.id);
    if (it == acc.end() || it->second.n == 0) {
      s.empty = true;
      out.push_back(s);
      continue;
    }
    const Acc& a = it->second;
    const double n = static_cast<double>(a.n);
    s.n_entries = a.n;
    s.pct_posts = 100.0 * static_cast<double>(a.posts) / n;
    s.pct_quotes = 100.0 * static_cast<double>(a.quotes) / n;
    s.pct_replies = 100.0 * static_cast<double>(a.replies) / n;
    s.mean_toxicity = a.tox_sum / n;
    const double var = a.tox_sq / n - s.mean_toxicity * s.mean_toxicity;
    s.toxicity_sd = std::sqrt(std::max(0.0, var));
    s.pct_media = 100.0 * static_cast<double>(a.media) / n;
    s.pct_url = 100.0 * static_cast<double>(a.urls) / n;
    s.mean_engagement = a.engagement_sum / n;
    out.push_back(s);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void write_summary_csv(std::ostream& out,
                       const std::vector<InfluencerSummary>& summaries) {
  write_csv_row(out, {"influencer_id", "display_name", "verified",
                      "n_original_entries", "pct_posts", "pct_quotes",
                      "pct_replies", "mean_toxicity", "toxicity_sd",
                      "pct_media", "pct_url", "mean_engagement"});
  double sums[9] = {0};
  double sqs[9] = {0};
  std::int64_t total_entries = 0;
  std::size_t n_nonempty = 0;
  for (const auto& s : summaries) {
    write_csv_row(out, {s.influencer_id, s.display_name,
                        s.verified ? "true" : "false",
                        std::to_string(s.n_entries), fmt(s.pct_posts),
                        fmt(s.pct_quotes), fmt(s.pct_replies),
                        fmt(s.mean_toxicity), fmt(s.toxicity_sd),
                        fmt(s.pct_media), fmt(s.pct_url),
                        fmt(s.mean_engagement)});
    if (s.empty) continue;
    ++n_nonempty;
    total_entries += s.n_entries;
    const double vals[9] = {static_cast<double>(s.n_entries), s.pct_posts,
                            s.pct_quotes,   s.pct_replies,  s.mean_toxicity,
                            s.toxicity_sd,  s.pct_media,    s.pct_url,
                            s.mean_engagement};
    for (int i = 0; i < 9; ++i) {
      sums[i] += vals[i];
      sqs[i] += vals[i] * vals[i];
    }
  }
  if (n_nonempty == 0) return;
  const double n = static_cast<double>(n_nonempty);
  std::vector<std::string> mean_row{"mean", "", ""};
  std::vector<std::string> sd_row{"sd", "", ""};
  for (int i = 0; i < 9; ++i) {
    const double m = sums[i] / n;
    mean_row.push_back(fmt(m));
    sd_row.push_back(fmt(std::sqrt(std::max(0.0, sqs[i] / n - m * m))));
  }
  write_csv_row(out, mean_row);
  write_csv_row(out, sd_row);
  write_csv_row(out, {"total", "", "", std::to_string(total_entries), "", "",
                      "", "", "", "", "", ""});
}

}  // namespace emm
