#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emm {

enum class EntryKind { post, quote, reply, retweet };
enum class EventKind { retweet, quote, reply, mention };

std::string_view to_string(EntryKind k);
std::string_view to_string(EventKind k);
std::optional<EntryKind> parse_entry_kind(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);

// One influencer-authored item. Timestamps are UTC seconds from ingest on;
// hour-of-day controls downstream are therefore UTC.
struct RawEntry {
  std::string id;
  std::string influencer_id;
  std::int64_t created_at = 0;
  std::string text;
  EntryKind kind = EntryKind::post;
  bool has_url = false;
  bool has_image = false;
  bool has_video = false;
  bool has_gif = false;
  std::optional<std::int64_t> like_count;  // unused in modeling, may be absent
};

struct EngagementEvent {
  std::string id;
  std::string target_entry_id;
  EventKind kind = EventKind::retweet;
  std::int64_t created_at = 0;
  std::string actor_id;
};

struct InfluencerRecord {
  std::string id;
  std::string display_name;
  bool verified = false;
  // UTC day start -> count; contiguous over the study window after gap fill.
  std::map<std::int64_t, std::int64_t> follower_count_by_day;
  double followers_mean_statuses = 0.0;
  double pct_verified_followers = 0.0;  // fraction in [0,1]
};

struct FeatureVector {
  bool is_quote = false;
  bool is_reply = false;
  bool has_url = false;
  bool has_image = false;
  bool has_video = false;
  bool has_gif = false;
  int n_chars = 0;
  int n_exclaim = 0;
  int n_question = 0;
  int n_hashtags = 0;
  int n_positive = 0;
  int n_negative = 0;
  double toxicity = 0.0;
  bool requests_retweet = false;
  int hour_of_day = 0;   // 0-23, UTC
  int day_of_week = 0;   // 0-6, Monday = 0
};

// The level-1 unit: a filtered original entry joined with its engagement
// count, features and influencer-level covariates.
struct AnalysisRow {
  std::string entry_id;
  std::string influencer_id;
  std::int64_t created_at = 0;
  std::int64_t engagement_count = 0;
  FeatureVector features;
  std::string dominant_topic;             // empty until topics are assigned
  double n_followers_prev_day = 0.0;      // on the day before posting
  double followers_mean_statuses = 0.0;
  double pct_verified_followers = 0.0;

  EntryKind kind() const {
    if (features.is_quote) return EntryKind::quote;
    if (features.is_reply) return EntryKind::reply;
    return EntryKind::post;
  }
};

}  // namespace emm
