#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "emm/types.hpp"

namespace emm {

enum class Format { jsonl, csv };

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> errors;  // one message per skipped record
};

// One RawEntry per well-formed record, in input order. Malformed records are
// skipped and reported; in strict mode the first one throws.
std::vector<RawEntry> load_entries(std::istream& in, Format format,
                                   LoadReport& report, bool strict = false);

std::vector<EngagementEvent> load_events(std::istream& in, Format format,
                                         LoadReport& report,
                                         bool strict = false);

// Profile CSV: id,display_name,verified,followers_mean_statuses,
// pct_verified_followers. Daily follower counts live in a separate
// long-format CSV (influencer_id,date,follower_count).
std::vector<InfluencerRecord> load_influencers(std::istream& in,
                                               LoadReport& report,
                                               bool strict = false);
void load_follower_counts(std::istream& in,
                          std::vector<InfluencerRecord>& influencers,
                          LoadReport& report, bool strict = false);

// Fills missing days over [window_start, window_end] with the prior day's
// value; a leading gap takes the first observed value.
void fill_follower_gaps(InfluencerRecord& influencer,
                        std::int64_t window_start, std::int64_t window_end);

void write_entries_jsonl(std::ostream& out,
                         const std::vector<RawEntry>& entries);
void write_events_jsonl(std::ostream& out,
                        const std::vector<EngagementEvent>& events);

}  // namespace emm
