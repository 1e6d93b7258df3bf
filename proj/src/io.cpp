#include "emm/io.hpp"

#include <istream>
#include <json.hpp>
#include <ostream>
#include <unordered_map>

#include "emm/csv.hpp"
#include "emm/error.hpp"
#include "emm/timeutil.hpp"

namespace emm {

using nlohmann::json;

std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::post: return "post";
    case EntryKind::quote: return "quote";
    case EntryKind::reply: return "reply";
    case EntryKind::retweet: return "retweet";
  }
  return "post";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::retweet: return "retweet";
    case EventKind::quote: return "quote";
    case EventKind::reply: return "reply";
    case EventKind::mention: return "mention";
  }
  return "retweet";
}

std::optional<EntryKind> parse_entry_kind(std::string_view s) {
  if (s == "post" || s == "tweet") return EntryKind::post;
  if (s == "quote") return EntryKind::quote;
  if (s == "reply") return EntryKind::reply;
  if (s == "retweet") return EntryKind::retweet;
  return std::nullopt;
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  if (s == "retweet") return EventKind::retweet;
  if (s == "quote") return EventKind::quote;
  if (s == "reply") return EventKind::reply;
  if (s == "mention") return EventKind::mention;
  return std::nullopt;
}

namespace {

std::int64_t parse_timestamp_field(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number()) return static_cast<std::int64_t>(v.get<double>());
  if (v.is_string()) {
    const auto ts = parse_iso8601(v.get<std::string>());
    if (!ts) throw Error("bad timestamp: " + v.get<std::string>());
    return *ts;
  }
  throw Error("timestamp must be ISO-8601 string or integer seconds");
}

bool parse_bool_field(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    return s == "true" || s == "1" || s == "TRUE" || s == "True";
  }
  throw Error(std::string("bad boolean field: ") + key);
}

RawEntry entry_from_json(const json& obj) {
  RawEntry e;
  e.id = obj.at("id").get<std::string>();
  if (e.id.empty()) throw Error("empty entry id");
  e.influencer_id = obj.at("influencer_id").get<std::string>();
  e.created_at = parse_timestamp_field(obj.at("created_at"));
  e.text = obj.value("text", std::string());
  const auto kind = parse_entry_kind(obj.at("kind").get<std::string>());
  if (!kind) throw Error("bad entry kind: " + obj.at("kind").get<std::string>());
  e.kind = *kind;
  e.has_url = parse_bool_field(obj, "has_url", false);
  e.has_image = parse_bool_field(obj, "has_image", false);
  e.has_video = parse_bool_field(obj, "has_video", false);
  e.has_gif = parse_bool_field(obj, "has_gif", false);
  if (obj.contains("like_count") && !obj.at("like_count").is_null()) {
    const std::int64_t lc = obj.at("like_count").get<std::int64_t>();
    if (lc < 0) throw Error("negative like_count");
    e.like_count = lc;
  }
  return e;
}

EngagementEvent event_from_json(const json& obj) {
  EngagementEvent e;
  e.id = obj.at("id").get<std::string>();
  e.target_entry_id = obj.at("target_entry_id").get<std::string>();
  const auto kind = parse_event_kind(obj.at("kind").get<std::string>());
  if (!kind) throw Error("bad event kind: " + obj.at("kind").get<std::string>());
  e.kind = *kind;
  e.created_at = parse_timestamp_field(obj.at("created_at"));
  if (e.created_at < 0) throw Error("negative event timestamp");
  e.actor_id = obj.value("actor_id", std::string());
  return e;
}

bool parse_bool_text(std::string_view s) {
  return s == "true" || s == "TRUE" || s == "True" || s == "1";
}

std::int64_t parse_timestamp_text(const std::string& s) {
  if (const auto ts = parse_iso8601(s)) return *ts;
  std::size_t used = 0;
  const std::int64_t v = std::stoll(s, &used);
  if (used != s.size()) throw Error("bad timestamp: " + s);
  return v;
}

bool blank_line(const std::string& line) {
  for (char c : line)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}

// Column lookup for headered CSV.
class HeaderIndex {
 public:
  explicit HeaderIndex(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
  }
  const std::string& get(const std::vector<std::string>& row,
                         const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end() || it->second >= row.size())
      throw Error("missing CSV column: " + name);
    return row[it->second];
  }
  std::string get_or(const std::vector<std::string>& row,
                     const std::string& name, std::string fallback) const {
    const auto it = index_.find(name);
    if (it == index_.end() || it->second >= row.size()) return fallback;
    return row[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

template <class Record, class ParseJson, class ParseCsv>
std::vector<Record> load_records(std::istream& in, Format format,
                                 LoadReport& report, bool strict,
                                 ParseJson parse_json, ParseCsv parse_csv) {
  std::vector<Record> out;
  const auto fail = [&](std::size_t lineno, const std::string& what) {
    const std::string msg = "line " + std::to_string(lineno) + ": " + what;
    if (strict) throw Error(msg);
    ++report.skipped;
    report.errors.push_back(msg);
  };
  if (format == Format::jsonl) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank_line(line)) continue;
      try {
        out.push_back(parse_json(json::parse(line)));
        ++report.loaded;
      } catch (const std::exception& ex) {
        fail(lineno, ex.what());
      }
    }
  } else {
    CsvReader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) return out;
    const HeaderIndex header(row);
    std::size_t lineno = 1;
    while (reader.next(row)) {
      ++lineno;
      if (row.size() == 1 && row[0].empty()) continue;
      try {
        out.push_back(parse_csv(header, row));
        ++report.loaded;
      } catch (const std::exception& ex) {
        fail(lineno, ex.what());
      }
    }
  }
  if (in.bad()) throw Error("unreadable input stream");
  return out;
}

}  // namespace

std::vector<RawEntry> load_entries(std::istream& in, Format format,
                                   LoadReport& report, bool strict) {
  return load_records<RawEntry>(
      in, format, report, strict,
      [](const json& obj) { return entry_from_json(obj); },
      [](const HeaderIndex& h, const std::vector<std::string>& row) {
        RawEntry e;
        e.id = h.get(row, "id");
        if (e.id.empty()) throw Error("empty entry id");
        e.influencer_id = h.get(row, "influencer_id");
        e.created_at = parse_timestamp_text(h.get(row, "created_at"));
        e.text = h.get_or(row, "text", "");
        const auto kind = parse_entry_kind(h.get(row, "kind"));
        if (!kind) throw Error("bad entry kind: " + h.get(row, "kind"));
        e.kind = *kind;
        e.has_url = parse_bool_text(h.get_or(row, "has_url", "false"));
        e.has_image = parse_bool_text(h.get_or(row, "has_image", "false"));
        e.has_video = parse_bool_text(h.get_or(row, "has_video", "false"));
        e.has_gif = parse_bool_text(h.get_or(row, "has_gif", "false"));
        const std::string lc = h.get_or(row, "like_count", "");
        if (!lc.empty()) e.like_count = std::stoll(lc);
        return e;
      });
}

std::vector<EngagementEvent> load_events(std::istream& in, Format format,
                                         LoadReport& report, bool strict) {
  return load_records<EngagementEvent>(
      in, format, report, strict,
      [](const json& obj) { return event_from_json(obj); },
      [](const HeaderIndex& h, const std::vector<std::string>& row) {
        EngagementEvent e;
        e.id = h.get(row, "id");
        e.target_entry_id = h.get(row, "target_entry_id");
        const auto kind = parse_event_kind(h.get(row, "kind"));
        if (!kind) throw Error("bad event kind: " + h.get(row, "kind"));
        e.kind = *kind;
        e.created_at = parse_timestamp_text(h.get(row, "created_at"));
        if (e.created_at < 0) throw Error("negative event timestamp");
        e.actor_id = h.get_or(row, "actor_id", "");
        return e;
      });
}

std::vector<InfluencerRecord> load_influencers(std::istream& in,
                                               LoadReport& report,
                                               bool strict) {
  return load_records<InfluencerRecord>(
      in, Format::csv, report, strict,
      [](const json&) -> InfluencerRecord {
        throw Error("influencers are CSV only");
      },
      [](const HeaderIndex& h, const std::vector<std::string>& row) {
        InfluencerRecord r;
        r.id = h.get(row, "id");
        if (r.id.empty()) throw Error("empty influencer id");
        r.display_name = h.get_or(row, "display_name", r.id);
        r.verified = parse_bool_text(h.get_or(row, "verified", "false"));
        r.followers_mean_statuses =
            std::stod(h.get_or(row, "followers_mean_statuses", "0"));
        r.pct_verified_followers =
            std::stod(h.get_or(row, "pct_verified_followers", "0"));
        if (r.pct_verified_followers < 0.0 || r.pct_verified_followers > 1.0)
          throw Error("pct_verified_followers outside [0,1]");
        return r;
      });
}

void load_follower_counts(std::istream& in,
                          std::vector<InfluencerRecord>& influencers,
                          LoadReport& report, bool strict) {
  std::unordered_map<std::string, InfluencerRecord*> by_id;
  for (auto& r : influencers) by_id[r.id] = &r;

  CsvReader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) return;
  const HeaderIndex header(row);
  std::size_t lineno = 1;
  while (reader.next(row)) {
    ++lineno;
    if (row.size() == 1 && row[0].empty()) continue;
    try {
      const std::string id = header.get(row, "influencer_id");
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("unknown influencer: " + id);
      const auto day = parse_iso8601(header.get(row, "date"));
      if (!day) throw Error("bad date: " + header.get(row, "date"));
      const std::int64_t count = std::stoll(header.get(row, "follower_count"));
      if (count < 0) throw Error("negative follower count");
      it->second->follower_count_by_day[utc_day_start(*day)] = count;
      ++report.loaded;
    } catch (const std::exception& ex) {
      const std::string msg = "line " + std::to_string(lineno) + ": " + ex.what();
      if (strict) throw Error(msg);
      ++report.skipped;
      report.errors.push_back(msg);
    }
  }
}

void fill_follower_gaps(InfluencerRecord& influencer,
                        std::int64_t window_start, std::int64_t window_end) {
  auto& days = influencer.follower_count_by_day;
  if (days.empty()) return;
  const std::int64_t first = utc_day_start(window_start);
  const std::int64_t last = utc_day_start(window_end);
  std::int64_t prior = days.begin()->second;
  for (std::int64_t d = first; d <= last; d += kSecondsPerDay) {
    const auto it = days.find(d);
    if (it == days.end()) {
      days[d] = prior;  // prior-day proxy; leading gaps take first observation
    } else {
      prior = it->second;
    }
  }
}

namespace {

json entry_to_json(const RawEntry& e) {
  json obj{{"id", e.id},
           {"influencer_id", e.influencer_id},
           {"created_at", format_iso8601(e.created_at)},
           {"text", e.text},
           {"kind", std::string(to_string(e.kind))},
           {"has_url", e.has_url},
           {"has_image", e.has_image},
           {"has_video", e.has_video},
           {"has_gif", e.has_gif}};
  if (e.like_count) obj["like_count"] = *e.like_count;
  return obj;
}

}  // namespace

void write_entries_jsonl(std::ostream& out,
                         const std::vector<RawEntry>& entries) {
  for (const auto& e : entries) out << entry_to_json(e).dump() << '\n';
}

void write_events_jsonl(std::ostream& out,
                        const std::vector<EngagementEvent>& events) {
  for (const auto& e : events) {
    const json obj{{"id", e.id},
                   {"target_entry_id", e.target_entry_id},
                   {"kind", std::string(to_string(e.kind))},
                   {"created_at", format_iso8601(e.created_at)},
                   {"actor_id", e.actor_id}};
    out << obj.dump() << '\n';
  }
}

}  // namespace emm
