#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "emm/types.hpp"

namespace emm {

// Drops retweets and anything created after window_end - window_days.
// Idempotent; preserves order.
std::vector<RawEntry> filter_original(const std::vector<RawEntry>& entries,
                                      std::int64_t window_end,
                                      int window_days = 7);

struct EngagementTally {
  std::unordered_map<std::string, std::int64_t> counts;  // entry id -> count
  std::int64_t orphans = 0;   // non-mention events not attributed to any entry
  std::int64_t mentions = 0;  // mention events, excluded from counts
};

// Counts retweet/quote/reply events landing within window_days of the target
// entry (inclusive of the entry's own timestamp, exact 86400-second days).
// Events up to skew_slack_seconds before the entry are counted as clock skew;
// anything earlier, later than the window, or targeting an unknown entry goes
// to the orphan tally. counts + orphans + mentions == total events.
EngagementTally aggregate_engagement(const std::vector<RawEntry>& entries,
                                     const std::vector<EngagementEvent>& events,
                                     int window_days = 7,
                                     std::int64_t skew_slack_seconds = 60);

double pearson_correlation(std::span<const double> x,
                           std::span<const double> y);

struct InfluencerSummary {
  std::string influencer_id;
  std::string display_name;
  bool verified = false;
  std::int64_t n_entries = 0;
  double pct_posts = 0.0;   // percentages of original entries, 0-100
  double pct_quotes = 0.0;
  double pct_replies = 0.0;
  double mean_toxicity = 0.0;
  double toxicity_sd = 0.0;
  double pct_media = 0.0;   // image, video or gif
  double pct_url = 0.0;
  double mean_engagement = 0.0;
  bool empty = false;       // influencer had no rows; all stats zero
};

// One row per influencer, ordered as the influencer list. Influencers with no
// rows get a zero row with the empty flag set.
std::vector<InfluencerSummary> summarize_influencers(
    const std::vector<AnalysisRow>& rows,
    const std::vector<InfluencerRecord>& influencers);

// Table-1-shaped CSV: per-influencer rows plus mean/sd/total footer rows.
void write_summary_csv(std::ostream& out,
                       const std::vector<InfluencerSummary>& summaries);

}  // namespace emm
