#include "emm/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <tuple>
#include <memory>
#include <sstream>
#include <unordered_set>

#include "emm/csv.hpp"
#include "emm/engagement.hpp"
#include "emm/error.hpp"
#include "emm/features.hpp"
#include "emm/lda.hpp"
#include "emm/lda_eval.hpp"
#include "emm/metrics.hpp"
#include "emm/rng.hpp"
#include "emm/simulate.hpp"
#include "emm/special.hpp"
#include "emm/text.hpp"
#include "emm/timeutil.hpp"
#include "emm/version.hpp"

namespace emm {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ModelSpec> default_model_specs() {
  const auto vars = [](std::initializer_list<const char*> names) {
    std::vector<VariableSpec> out;
    for (const char* n : names) out.push_back({n, Transform::automatic, false, ""});
    return out;
  };
  const std::vector<const char*> content{
      "kind",       "has_url",    "has_image",  "has_video",
      "has_gif",    "toxicity",   "n_chars",    "n_exclaim",
      "n_question", "n_hashtags", "n_positive", "n_negative",
      "requests_retweet", "hour_of_day", "day_of_week"};
  const std::vector<const char*> composition{"followers_mean_statuses",
                                             "pct_verified_followers"};

  std::vector<ModelSpec> specs(8);
  specs[0].label = "No predictors";
  specs[1].label = "content (minus topics)";
  for (const char* n : content) specs[1].variables.push_back({n, Transform::automatic, false, ""});
  specs[2].label = "topics";
  specs[2].variables = vars({"topic"});
  specs[3].label = "all content";
  specs[3].variables = specs[1].variables;
  specs[3].variables.push_back({"topic", Transform::automatic, false, ""});
  specs[4].label = "followership composition";
  for (const char* n : composition) specs[4].variables.push_back({n, Transform::automatic, false, ""});
  specs[5].label = "followership size";
  specs[5].variables = vars({"n_followers"});
  specs[6].label = "composition + size";
  specs[6].variables = specs[4].variables;
  specs[6].variables.push_back({"n_followers", Transform::automatic, false, ""});
  specs[7].label = "all content + all follower vars";
  specs[7].variables = specs[3].variables;
  for (const auto& v : specs[6].variables) specs[7].variables.push_back(v);
  return specs;
}

RunConfig default_config() {
  RunConfig c;
  c.window_start = *parse_iso8601("2020-07-08T00:00:00Z");
  c.window_end = *parse_iso8601("2021-01-09T00:00:00Z");
  c.models = default_model_specs();
  return c;
}

namespace {

Transform transform_from_string(const std::string& s) {
  if (s == "auto") return Transform::automatic;
  if (s == "within_between") return Transform::within_between;
  if (s == "level2") return Transform::level2;
  if (s == "dummy") return Transform::dummy;
  if (s == "binary") return Transform::binary;
  if (s == "raw") return Transform::raw;
  throw Error("unknown transform: " + s);
}

std::string transform_to_string(Transform t) {
  switch (t) {
    case Transform::automatic: return "auto";
    case Transform::within_between: return "within_between";
    case Transform::level2: return "level2";
    case Transform::dummy: return "dummy";
    case Transform::binary: return "binary";
    case Transform::raw: return "raw";
  }
  return "auto";
}

VariableSpec variable_from_json(const json& v) {
  VariableSpec out;
  if (v.is_string()) {
    out.name = v.get<std::string>();
    return out;
  }
  out.name = v.at("name").get<std::string>();
  out.transform = transform_from_string(v.value("transform", "auto"));
  out.log10 = v.value("log10", false);
  out.reference = v.value("reference", "");
  return out;
}

ModelSpec model_spec_from_json(const json& m) {
  ModelSpec spec;
  spec.label = m.value("label", "model");
  spec.response = m.value("response", "engagement");
  spec.group = m.value("group", "influencer_id");
  if (m.contains("variables"))
    for (const auto& v : m.at("variables"))
      spec.variables.push_back(variable_from_json(v));
  return spec;
}

json model_spec_to_json(const ModelSpec& spec) {
  json vars = json::array();
  for (const auto& v : spec.variables)
    vars.push_back({{"name", v.name},
                    {"transform", transform_to_string(v.transform)},
                    {"log10", v.log10},
                    {"reference", v.reference}});
  return {{"label", spec.label},
          {"response", spec.response},
          {"group", spec.group},
          {"variables", vars}};
}

std::int64_t timestamp_from_json(const json& v) {
  if (v.is_number()) return v.get<std::int64_t>();
  const auto ts = parse_iso8601(v.get<std::string>());
  if (!ts) throw Error("bad timestamp in config: " + v.get<std::string>());
  return *ts;
}

Format format_from_string(const std::string& s) {
  if (s == "jsonl") return Format::jsonl;
  if (s == "csv") return Format::csv;
  throw Error("unknown format: " + s);
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  const json obj = json::parse(text);
  RunConfig c = default_config();
  if (obj.contains("inputs")) {
    const auto& in = obj.at("inputs");
    c.entries_path = in.value("entries", "");
    c.events_path = in.value("events", "");
    c.influencers_path = in.value("influencers", "");
    c.followers_path = in.value("followers", "");
    c.entries_format = format_from_string(in.value("entries_format", "jsonl"));
    c.events_format = format_from_string(in.value("events_format", "jsonl"));
  }
  if (obj.contains("window")) {
    const auto& w = obj.at("window");
    if (w.contains("start")) c.window_start = timestamp_from_json(w.at("start"));
    if (w.contains("end")) c.window_end = timestamp_from_json(w.at("end"));
    c.engagement_window_days = w.value("engagement_days", 7);
  }
  if (obj.contains("features")) {
    const auto& f = obj.at("features");
    c.lexicon_path = f.value("lexicon", "");
    c.patterns_path = f.value("patterns", "");
    c.stopwords_path = f.value("stopwords", "");
    c.strip_urls_in_char_count = f.value("strip_urls_in_char_count", false);
    if (f.contains("toxicity")) {
      const auto& t = f.at("toxicity");
      c.toxicity.mode = t.value("mode", "column");
      c.toxicity.path = t.value("path", "");
      c.toxicity.constant = t.value("constant", 0.0);
      c.toxicity.missing = t.value("missing", "error");
      c.toxicity.wordlist = t.value("wordlist", "");
    }
  }
  if (obj.contains("topics")) {
    const auto& t = obj.at("topics");
    if (t.contains("k_grid")) c.topics.k_grid = t.at("k_grid").get<std::vector<int>>();
    if (t.contains("alpha_grid"))
      c.topics.alpha_grid = t.at("alpha_grid").get<std::vector<double>>();
    if (t.contains("beta_grid"))
      c.topics.beta_grid = t.at("beta_grid").get<std::vector<double>>();
    c.topics.alpha = t.value("alpha", 0.1);
    c.topics.beta = t.value("beta", 0.1);
    c.topics.folds = t.value("folds", 5);
    c.topics.iterations = t.value("iterations", 1000);
    c.topics.burn_in = t.value("burn_in", 200);
    c.topics.top_n = t.value("top_n", 5);
    c.topics.merge_map = t.value("merge_map", "");
    c.topics.threshold = t.value("threshold", 0.0);
  }
  if (obj.contains("models")) {
    c.models.clear();
    for (const auto& m : obj.at("models")) c.models.push_back(model_spec_from_json(m));
  }
  if (obj.contains("glmm")) {
    const auto& g = obj.at("glmm");
    c.glmm.quad_order = g.value("quad_order", 15);
    c.glmm.max_iter = g.value("max_iter", 200);
    c.glmm.tol = g.value("tol", 1e-7);
    c.glmm.fix_sigma_u_zero = g.value("fix_sigma_u_zero", false);
  }
  if (obj.contains("encode")) {
    c.encode.center_between = obj.at("encode").value("center_between", true);
  }
  if (obj.contains("simulate")) {
    const auto& s = obj.at("simulate");
    c.sim.n_groups = s.value("n_groups", 40);
    c.sim.n_per_group = s.value("n_per_group", 200);
    if (s.contains("beta")) c.sim.beta = s.at("beta").get<std::vector<double>>();
    c.sim.sigma_u = s.value("sigma_u", 1.0);
    c.sim.theta = s.value("theta", 1.5);
    c.sim.add_dummy = s.value("add_dummy", false);
  }
  c.out_dir = obj.value("out", c.out_dir);
  c.seed = obj.value("seed", c.seed);
  c.jobs = obj.value("jobs", c.jobs);
  c.strict = obj.value("strict", c.strict);
  if (c.window_start >= c.window_end)
    throw Error("config: window start must precede end");
  return c;
}

std::string config_to_json_text(const RunConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_spec_to_json(m));
  const json obj{
      {"inputs",
       {{"entries", c.entries_path},
        {"events", c.events_path},
        {"influencers", c.influencers_path},
        {"followers", c.followers_path},
        {"entries_format", c.entries_format == Format::jsonl ? "jsonl" : "csv"},
        {"events_format", c.events_format == Format::jsonl ? "jsonl" : "csv"}}},
      {"window",
       {{"start", format_iso8601(c.window_start)},
        {"end", format_iso8601(c.window_end)},
        {"engagement_days", c.engagement_window_days}}},
      {"features",
       {{"lexicon", c.lexicon_path},
        {"patterns", c.patterns_path},
        {"stopwords", c.stopwords_path},
        {"strip_urls_in_char_count", c.strip_urls_in_char_count},
        {"toxicity",
         {{"mode", c.toxicity.mode},
          {"path", c.toxicity.path},
          {"constant", c.toxicity.constant},
          {"missing", c.toxicity.missing},
          {"wordlist", c.toxicity.wordlist}}}}},
      {"topics",
       {{"k_grid", c.topics.k_grid},
        {"alpha_grid", c.topics.alpha_grid},
        {"beta_grid", c.topics.beta_grid},
        {"alpha", c.topics.alpha},
        {"beta", c.topics.beta},
        {"folds", c.topics.folds},
        {"iterations", c.topics.iterations},
        {"burn_in", c.topics.burn_in},
        {"top_n", c.topics.top_n},
        {"merge_map", c.topics.merge_map},
        {"threshold", c.topics.threshold}}},
      {"models", models},
      {"glmm",
       {{"quad_order", c.glmm.quad_order},
        {"max_iter", c.glmm.max_iter},
        {"tol", c.glmm.tol},
        {"fix_sigma_u_zero", c.glmm.fix_sigma_u_zero}}},
      {"encode", {{"center_between", c.encode.center_between}}},
      {"simulate",
       {{"n_groups", c.sim.n_groups},
        {"n_per_group", c.sim.n_per_group},
        {"beta", c.sim.beta},
        {"sigma_u", c.sim.sigma_u},
        {"theta", c.sim.theta},
        {"add_dummy", c.sim.add_dummy}}},
      {"out", c.out_dir},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"strict", c.strict}};
  return obj.dump(2);
}

RunConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const RunConfig& config,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  json in_hashes = json::object();
  for (const auto& p : inputs) in_hashes[p.string()] = hash_file(p);
  json out_hashes = json::object();
  for (const auto& p : outputs) out_hashes[p.string()] = hash_file(p);
  const json obj{{"command", command},
                 {"version", kVersion},
                 {"seed", config.seed},
                 {"jobs", config.jobs},
                 {"config_hash", fnv1a_hex(config_to_json_text(config))},
                 {"inputs", in_hashes},
                 {"outputs", out_hashes}};
  std::ofstream out(out_dir / ("manifest_" + command + ".json"));
  out << obj.dump(2) << '\n';
}

namespace {

std::ifstream open_input(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + ": " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write: " + path.string());
  return out;
}

void log_report(std::ostream& log, const char* what, const LoadReport& report) {
  log << what << ": " << report.loaded << " loaded, " << report.skipped
      << " skipped\n";
  for (std::size_t i = 0; i < report.errors.size() && i < 5; ++i)
    log << "  " << report.errors[i] << '\n';
}

struct Caches {
  fs::path dir;
  fs::path entries() const { return dir / "cache" / "entries.jsonl"; }
  fs::path engagement() const { return dir / "cache" / "engagement.csv"; }
  fs::path influencers() const { return dir / "cache" / "influencers.csv"; }
  fs::path followers() const { return dir / "cache" / "followers.csv"; }
  fs::path stats() const { return dir / "cache" / "stats.json"; }
  fs::path rows() const { return dir / "cache" / "rows.csv"; }
  fs::path corpus() const { return dir / "topics" / "corpus.json"; }
  fs::path cv() const { return dir / "topics" / "cv.csv"; }
  fs::path topic_fit() const { return dir / "topics" / "fit.json"; }
  fs::path intrusion() const { return dir / "topics" / "intrusion.csv"; }
  fs::path intrusion_key() const { return dir / "topics" / "intrusion_key.csv"; }
  fs::path dominant() const { return dir / "topics" / "dominant.csv"; }
  fs::path fits() const { return dir / "model" / "fits.json"; }
  fs::path comparison(const char* ext) const {
    return dir / "model" / (std::string("comparison.") + ext);
  }
  fs::path irr(const char* ext) const {
    return dir / "model" / (std::string("irr.") + ext);
  }
  fs::path summary() const { return dir / "cache" / "summary.csv"; }
};

std::vector<RawEntry> load_entries_cache(const Caches& caches) {
  auto in = open_input(caches.entries(), "entries cache (run ingest first)");
  LoadReport report;
  return load_entries(in, Format::jsonl, report, /*strict=*/true);
}

std::vector<InfluencerRecord> load_influencer_caches(const Caches& caches) {
  std::vector<InfluencerRecord> influencers;
  if (fs::exists(caches.influencers())) {
    auto in = open_input(caches.influencers(), "influencer cache");
    LoadReport report;
    influencers = load_influencers(in, report, /*strict=*/true);
    if (fs::exists(caches.followers())) {
      auto fin = open_input(caches.followers(), "follower cache");
      load_follower_counts(fin, influencers, report, /*strict=*/true);
    }
  }
  return influencers;
}

}  // namespace

int cmd_ingest(const RunConfig& config, std::ostream& log) {
  if (config.entries_path.empty()) throw Error("ingest: inputs.entries not set");
  const Caches caches{config.out_dir};

  LoadReport entries_report;
  auto entries_in = open_input(config.entries_path, "entries");
  auto entries = load_entries(entries_in, config.entries_format,
                              entries_report, config.strict);
  log_report(log, "entries", entries_report);
  if (entries.empty()) log << "warning: no entries loaded\n";

  // Study-window invariant: out-of-window entries are dropped up front.
  std::size_t out_of_window = 0;
  {
    std::vector<RawEntry> kept;
    kept.reserve(entries.size());
    for (auto& e : entries) {
      if (e.created_at < config.window_start || e.created_at > config.window_end)
        ++out_of_window;
      else
        kept.push_back(std::move(e));
    }
    entries = std::move(kept);
  }
  if (out_of_window) {
    if (config.strict)
      throw Error("ingest: " + std::to_string(out_of_window) +
                  " entries outside the study window");
    log << "warning: dropped " << out_of_window
        << " entries outside the study window\n";
  }

  std::vector<EngagementEvent> events;
  LoadReport events_report;
  if (!config.events_path.empty()) {
    auto events_in = open_input(config.events_path, "events");
    events = load_events(events_in, config.events_format, events_report,
                         config.strict);
    log_report(log, "events", events_report);
  }

  std::vector<InfluencerRecord> influencers;
  LoadReport influencer_report;
  if (!config.influencers_path.empty()) {
    auto inf_in = open_input(config.influencers_path, "influencers");
    influencers = load_influencers(inf_in, influencer_report, config.strict);
    if (!config.followers_path.empty()) {
      auto fol_in = open_input(config.followers_path, "followers");
      load_follower_counts(fol_in, influencers, influencer_report,
                           config.strict);
    }
    for (auto& inf : influencers)
      fill_follower_gaps(inf, config.window_start, config.window_end);
    log_report(log, "influencers", influencer_report);
  }

  const auto filtered = filter_original(entries, config.window_end, 7);
  const auto tally = aggregate_engagement(filtered, events,
                                          config.engagement_window_days);

  {
    auto out = open_output(caches.entries());
    write_entries_jsonl(out, filtered);
  }
  {
    auto out = open_output(caches.engagement());
    out << "entry_id,count\n";
    for (const auto& e : filtered)
      out << csv_escape(e.id) << ',' << tally.counts.at(e.id) << '\n';
  }
  {
    auto out = open_output(caches.influencers());
    out << "id,display_name,verified,followers_mean_statuses,"
           "pct_verified_followers\n";
    for (const auto& inf : influencers) {
      out << csv_escape(inf.id) << ',' << csv_escape(inf.display_name) << ','
          << (inf.verified ? "true" : "false") << ','
          << inf.followers_mean_statuses << ',' << inf.pct_verified_followers
          << '\n';
    }
  }
  {
    auto out = open_output(caches.followers());
    out << "influencer_id,date,follower_count\n";
    for (const auto& inf : influencers)
      for (const auto& [day, count] : inf.follower_count_by_day)
        out << csv_escape(inf.id) << ',' << format_iso_date(day) << ','
            << count << '\n';
  }
  {
    auto out = open_output(caches.stats());
    const json stats{{"entries_loaded", entries_report.loaded},
                     {"entries_skipped", entries_report.skipped},
                     {"entries_out_of_window", out_of_window},
                     {"entries_after_filter", filtered.size()},
                     {"events_loaded", events_report.loaded},
                     {"events_skipped", events_report.skipped},
                     {"orphan_events", tally.orphans},
                     {"mention_events", tally.mentions}};
    out << stats.dump(2) << '\n';
  }
  log << "ingest: " << filtered.size() << " original entries, "
      << tally.orphans << " orphan events, " << tally.mentions
      << " mentions\n";

  std::vector<fs::path> inputs{config.entries_path};
  if (!config.events_path.empty()) inputs.push_back(config.events_path);
  if (!config.influencers_path.empty()) inputs.push_back(config.influencers_path);
  if (!config.followers_path.empty()) inputs.push_back(config.followers_path);
  write_manifest(config.out_dir, "ingest", config, inputs,
                 {caches.entries(), caches.engagement(), caches.influencers(),
                  caches.followers(), caches.stats()});
  return 0;
}

int cmd_featurize(const RunConfig& config, std::ostream& log) {
  const Caches caches{config.out_dir};
  const auto entries = load_entries_cache(caches);
  const auto influencers = load_influencer_caches(caches);

  std::unordered_map<std::string, std::int64_t> counts;
  {
    auto in = open_input(caches.engagement(), "engagement cache");
    CsvReader reader(in);
    std::vector<std::string> row;
    reader.next(row);  // header
    while (reader.next(row))
      if (row.size() >= 2 && !row[0].empty()) counts[row[0]] = std::stoll(row[1]);
  }

  if (config.lexicon_path.empty())
    throw Error("featurize: features.lexicon not set");
  auto lex_in = open_input(config.lexicon_path, "lexicon");
  const Lexicon lexicon = load_lexicon_csv(lex_in);

  std::unique_ptr<RetweetRequestDetector> detector;
  if (!config.patterns_path.empty()) {
    auto pat_in = open_input(config.patterns_path, "pattern file");
    detector = std::make_unique<RetweetRequestDetector>(
        RetweetRequestDetector::from_file(pat_in));
  }

  std::unique_ptr<ToxicityScorer> scorer;
  if (config.toxicity.mode == "constant") {
    scorer = std::make_unique<ConstantToxicity>(config.toxicity.constant);
  } else if (config.toxicity.mode == "wordlist") {
    auto words_in = open_input(config.toxicity.wordlist, "toxicity word list");
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(words_in, line)) {
      const auto t = trim_whitespace(line);
      if (!t.empty()) words.insert(to_lower(t));
    }
    scorer = std::make_unique<WordListToxicity>(std::move(words));
  } else if (config.toxicity.mode == "column") {
    if (config.toxicity.path.empty())
      throw Error("featurize: toxicity.path not set for column mode");
    auto tox_in = open_input(config.toxicity.path, "toxicity scores");
    scorer = std::make_unique<PrecomputedToxicity>(
        tox_in,
        config.toxicity.missing == "impute"
            ? PrecomputedToxicity::MissingPolicy::impute_influencer_mean
            : PrecomputedToxicity::MissingPolicy::error,
        entries);
  } else {
    throw Error("featurize: unknown toxicity mode " + config.toxicity.mode);
  }

  FeatureConfig fc;
  fc.lexicon = &lexicon;
  fc.detector = detector.get();
  fc.toxicity = scorer.get();
  fc.strip_urls_in_char_count = config.strip_urls_in_char_count;
  const auto rows = build_rows(entries, counts, influencers, fc);

  {
    auto out = open_output(caches.rows());
    write_table_csv(out, rows_to_table(rows));
  }
  if (!influencers.empty()) {
    auto out = open_output(caches.summary());
    write_summary_csv(out, summarize_influencers(rows, influencers));
  }
  log << "featurize: " << rows.size() << " analysis rows\n";
  write_manifest(config.out_dir, "featurize", config,
                 {caches.entries(), config.lexicon_path},
                 {caches.rows(), caches.summary()});
  return 0;
}

int cmd_topics(const RunConfig& config, std::ostream& log) {
  const Caches caches{config.out_dir};
  const auto entries = load_entries_cache(caches);
  if (entries.empty()) throw Error("topics: entries cache is empty");

  PreprocessOptions opts;
  if (!config.stopwords_path.empty()) {
    auto in = open_input(config.stopwords_path, "stopword list");
    opts.stopwords = load_stopwords(in);
  } else {
    opts.stopwords = default_stopwords();
  }

  std::vector<std::string> texts, ids;
  for (const auto& e : entries) {
    texts.push_back(e.text);
    ids.push_back(e.id);
  }
  const Corpus corpus = preprocess(texts, ids, opts);
  if (corpus.n_tokens() == 0) throw Error("topics: corpus has no tokens");
  {
    auto out = open_output(caches.corpus());
    save_corpus_json(out, corpus);
  }
  log << "topics: corpus of " << corpus.n_docs() << " docs, "
      << corpus.vocab_size() << " words, " << corpus.empty_docs.size()
      << " empty docs\n";

  LdaRunOptions run;
  run.n_iterations = config.topics.iterations;
  run.burn_in = config.topics.burn_in;
  run.coherence_top_n = config.topics.top_n;

  struct FullRow {
    int k;
    double alpha, beta;
    CvRow cv;
  };
  std::vector<FullRow> table;

  // Stage 1: k grid at fixed (alpha, beta).
  const auto stage1 =
      cross_validate(corpus, config.topics.k_grid, config.topics.alpha,
                     config.topics.beta, config.topics.folds,
                     derive_seed(config.seed, 1), run);
  std::map<int, double> mean_by_k;
  std::map<int, int> count_by_k;
  for (const auto& row : stage1) {
    table.push_back({row.k, config.topics.alpha, config.topics.beta, row});
    mean_by_k[row.k] += row.held_out_loglik;
    ++count_by_k[row.k];
  }
  int k_star = config.topics.k_grid.front();
  double best = -std::numeric_limits<double>::infinity();
  for (auto& [k, sum] : mean_by_k) {
    const double mean = sum / count_by_k[k];
    if (mean > best) {
      best = mean;
      k_star = k;
    }
  }
  log << "topics: k* = " << k_star << " by held-out log-likelihood\n";

  // Stage 2: (alpha, beta) grid at k*.
  double alpha_star = config.topics.alpha;
  double beta_star = config.topics.beta;
  double best2 = -std::numeric_limits<double>::infinity();
  std::uint64_t stage2_stream = 100;
  for (double a : config.topics.alpha_grid) {
    for (double b : config.topics.beta_grid) {
      const auto rows = cross_validate(corpus, {k_star}, a, b,
                                       config.topics.folds,
                                       derive_seed(config.seed, ++stage2_stream),
                                       run);
      double mean = 0.0;
      for (const auto& row : rows) {
        table.push_back({k_star, a, b, row});
        mean += row.held_out_loglik;
      }
      mean /= static_cast<double>(rows.size());
      if (mean > best2) {
        best2 = mean;
        alpha_star = a;
        beta_star = b;
      }
    }
  }
  log << "topics: alpha* = " << alpha_star << ", beta* = " << beta_star << '\n';

  {
    auto out = open_output(caches.cv());
    out << "k,alpha,beta,fold,held_out_loglik,mean_coherence\n";
    char buf[160];
    for (const auto& r : table) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g,%.17g\n", r.k,
                    r.alpha, r.beta, r.cv.fold, r.cv.held_out_loglik,
                    r.cv.mean_coherence);
      out << buf;
    }
  }
  {
    // Per-configuration summary of the full CV table.
    log << "k     alpha   beta    held-out loglik  mean coherence\n";
    std::map<std::tuple<int, double, double>, std::pair<double, double>> acc;
    std::map<std::tuple<int, double, double>, int> counts;
    for (const auto& r : table) {
      const auto key = std::make_tuple(r.k, r.alpha, r.beta);
      acc[key].first += r.cv.held_out_loglik;
      acc[key].second += r.cv.mean_coherence;
      ++counts[key];
    }
    char buf[160];
    for (const auto& [key, sums] : acc) {
      const double n = counts[key];
      std::snprintf(buf, sizeof(buf), "%-5d %-7g %-7g %-16.2f %-14.3f\n",
                    std::get<0>(key), std::get<1>(key), std::get<2>(key),
                    sums.first / n, sums.second / n);
      log << buf;
    }
  }

  const TopicModelFit final_fit =
      fit_lda(corpus, k_star, alpha_star, beta_star, config.topics.iterations,
              config.topics.burn_in, derive_seed(config.seed, 2));
  {
    auto out = open_output(caches.topic_fit());
    save_fit_json(out, final_fit);
  }

  const auto items = intrusion_items(final_fit, corpus, derive_seed(config.seed, 3));
  {
    auto out = open_output(caches.intrusion());
    auto key = open_output(caches.intrusion_key());
    out << "topic,word1,word2,word3,word4,word5,word6\n";
    key << "topic,intruder_position,intruder_word\n";
    for (const auto& item : items) {
      out << item.topic;
      for (const auto& w : item.words) out << ',' << csv_escape(w);
      out << '\n';
      key << item.topic << ',' << (item.intruder_pos + 1) << ','
          << csv_escape(item.words[static_cast<std::size_t>(item.intruder_pos)])
          << '\n';
    }
  }

  std::map<int, std::string> mapping;
  if (!config.topics.merge_map.empty()) {
    auto in = open_input(config.topics.merge_map, "merge map");
    CsvReader reader(in);
    std::vector<std::string> row;
    reader.next(row);  // header
    while (reader.next(row))
      if (row.size() >= 2 && !row[0].empty())
        mapping[std::stoi(row[0])] = row[1];
  } else {
    for (int t = 0; t < final_fit.k; ++t)
      mapping[t] = "topic" + std::to_string(t);
  }
  const MergedTopics merged = merge_topics(final_fit, mapping);
  {
    auto out = open_output(caches.dominant());
    out << "entry_id,topic,mass,low_confidence\n";
    char buf[64];
    for (std::size_t d = 0; d < merged.labels.size(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", merged.masses[d]);
      out << csv_escape(corpus.doc_ids[d]) << ','
          << csv_escape(merged.labels[d]) << ',' << buf << ','
          << (merged.masses[d] <= config.topics.threshold ? "true" : "false")
          << '\n';
    }
  }

  write_manifest(config.out_dir, "topics", config, {caches.entries()},
                 {caches.corpus(), caches.cv(), caches.topic_fit(),
                  caches.intrusion(), caches.intrusion_key(),
                  caches.dominant()});
  return 0;
}

namespace {

struct FitArtifacts {
  std::vector<std::string> labels;
  std::vector<FittedGlmm> fits;
  std::vector<DesignMatrix> designs;
  std::vector<std::string> failures;
};

void write_fit_outputs(const Caches& caches, const FitArtifacts& artifacts,
                       std::ostream& log) {
  std::vector<ModelResult> results;
  for (std::size_t i = 0; i < artifacts.fits.size(); ++i)
    results.push_back({artifacts.labels[i], &artifacts.fits[i],
                       &artifacts.designs[i]});
  const auto reports = compare_models(results, 0);
  {
    auto out = open_output(caches.comparison("txt"));
    out << render_comparison_text(reports);
  }
  {
    auto out = open_output(caches.comparison("csv"));
    write_comparison_csv(out, reports);
  }
  {
    auto out = open_output(caches.comparison("json"));
    write_comparison_json(out, reports);
  }

  const std::size_t last = artifacts.fits.size() - 1;
  {
    auto out = open_output(caches.dir / "model" / "design.csv");
    write_design_csv(out, artifacts.designs[last]);
    auto sidecar = open_output(caches.dir / "model" / "design.json");
    write_design_sidecar_json(sidecar, artifacts.designs[last]);
  }
  const auto irr = irr_table(artifacts.fits[last],
                             artifacts.designs[last].columns);
  {
    auto out = open_output(caches.irr("txt"));
    out << render_irr_text(irr, &reports[last]);
  }
  {
    auto out = open_output(caches.irr("csv"));
    write_irr_csv(out, irr);
  }
  {
    auto out = open_output(caches.irr("json"));
    write_irr_json(out, irr, &reports[last]);
  }

  json fits_json = json::array();
  for (std::size_t i = 0; i < artifacts.fits.size(); ++i) {
    std::ostringstream fit_buf;
    save_glmm_json(fit_buf, artifacts.fits[i]);
    json irr_rows = json::array();
    for (const auto& row :
         irr_table(artifacts.fits[i], artifacts.designs[i].columns)) {
      irr_rows.push_back({{"variable", row.name},
                          {"irr", row.irr},
                          {"se", row.se},
                          {"p", row.p},
                          {"stars", row.stars},
                          {"reliable", row.reliable}});
    }
    fits_json.push_back({{"label", artifacts.labels[i]},
                         {"fit", json::parse(fit_buf.str())},
                         {"irr", irr_rows},
                         {"report",
                          {{"aic", reports[i].aic},
                           {"delta_aic", reports[i].delta_aic},
                           {"level1_var", reports[i].level1_var},
                           {"level2_var", reports[i].level2_var},
                           {"adjusted_icc", reports[i].adjusted_icc},
                           {"conditional_r2", reports[i].conditional_r2},
                           {"loglik", reports[i].loglik},
                           {"n_params", reports[i].n_params}}}});
  }
  {
    auto out = open_output(caches.fits());
    out << fits_json.dump(2) << '\n';
  }
  log << render_comparison_text(reports);
}

}  // namespace

int cmd_fit(const RunConfig& config, std::ostream& log) {
  const Caches caches{config.out_dir};
  if (config.models.empty()) throw Error("fit: no model specs configured");

  auto rows_in = open_input(caches.rows(), "rows cache (run featurize first)");
  Table table = read_table_csv(rows_in);
  if (table.n_rows == 0) throw Error("fit: rows cache is empty");

  // Dominant topics, when computed, override the rows-cache topic column.
  if (fs::exists(caches.dominant())) {
    auto in = open_input(caches.dominant(), "dominant topics");
    CsvReader reader(in);
    std::vector<std::string> row;
    reader.next(row);
    std::unordered_map<std::string, std::string> topic_of;
    while (reader.next(row))
      if (row.size() >= 2) topic_of[row[0]] = row[1];
    const auto& ids = table.categorical.at("entry_id");
    auto& topic = table.categorical["topic"];
    topic.resize(table.n_rows);
    for (std::size_t i = 0; i < table.n_rows; ++i) {
      const auto it = topic_of.find(ids[i]);
      if (it != topic_of.end()) topic[i] = it->second;
    }
  }

  FitArtifacts artifacts;
  for (const auto& spec : config.models) {
    try {
      const bool wants_topic =
          std::any_of(spec.variables.begin(), spec.variables.end(),
                      [](const VariableSpec& v) { return v.name == "topic"; });
      if (wants_topic) {
        const auto& topic = table.categorical["topic"];
        if (std::all_of(topic.begin(), topic.end(),
                        [](const std::string& t) { return t.empty(); }))
          throw Error("topic variable requested but no dominant topics (run topics)");
      }
      DesignMatrix design = encode(table, spec, config.encode);
      for (const auto& w : design.warnings)
        log << "  [" << spec.label << "] " << w << '\n';
      GlmmOptions options = config.glmm;
      FittedGlmm fitted = fit(design, options);
      log << "fit [" << spec.label << "]: loglik " << fitted.loglik << " in "
          << fitted.iterations << " iterations\n";
      artifacts.labels.push_back(spec.label);
      artifacts.fits.push_back(std::move(fitted));
      artifacts.designs.push_back(std::move(design));
    } catch (const std::exception& ex) {
      artifacts.failures.push_back(spec.label + ": " + ex.what());
      log << "fit [" << spec.label << "] FAILED: " << ex.what() << '\n';
    }
  }
  if (artifacts.fits.empty()) throw Error("fit: every model spec failed");

  write_fit_outputs(caches, artifacts, log);
  write_manifest(config.out_dir, "fit", config, {caches.rows()},
                 {caches.comparison("csv"), caches.irr("csv"), caches.fits()});
  if (!artifacts.failures.empty()) {
    log << artifacts.failures.size() << " model spec(s) failed\n";
    return static_cast<int>(artifacts.failures.size());
  }
  return 0;
}

namespace {

int render_from_fits_json(const RunConfig& config, std::ostream& log,
                          bool comparison_only) {
  const Caches caches{config.out_dir};
  auto in = open_input(caches.fits(), "fits artifact (run fit first)");
  json arr;
  in >> arr;
  std::vector<ModelReport> reports;
  for (const auto& item : arr) {
    ModelReport r;
    r.label = item.at("label").get<std::string>();
    const auto& rep = item.at("report");
    r.aic = rep.at("aic").get<double>();
    r.delta_aic = rep.at("delta_aic").get<double>();
    r.level1_var = rep.at("level1_var").get<double>();
    r.level2_var = rep.at("level2_var").get<double>();
    r.adjusted_icc = rep.at("adjusted_icc").get<double>();
    r.conditional_r2 = rep.at("conditional_r2").get<double>();
    r.loglik = rep.at("loglik").get<double>();
    r.n_params = rep.at("n_params").get<int>();
    reports.push_back(std::move(r));
  }
  log << render_comparison_text(reports);
  if (!comparison_only && !arr.empty()) {
    std::vector<IrrRow> rows;
    for (const auto& item : arr.back().at("irr")) {
      IrrRow row;
      row.name = item.at("variable").get<std::string>();
      row.irr = item.at("irr").get<double>();
      row.se = item.at("se").get<double>();
      row.p = item.at("p").get<double>();
      row.stars = item.at("stars").get<std::string>();
      row.reliable = item.at("reliable").get<bool>();
      rows.push_back(std::move(row));
    }
    log << render_irr_text(rows, &reports.back());
  }
  return 0;
}

}  // namespace

int cmd_compare(const RunConfig& config, std::ostream& log) {
  return render_from_fits_json(config, log, /*comparison_only=*/true);
}

int cmd_report(const RunConfig& config, std::ostream& log) {
  return render_from_fits_json(config, log, /*comparison_only=*/false);
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const Caches caches{config.out_dir};
  SimulationSpec spec;
  spec.n_groups = config.sim.n_groups;
  spec.n_per_group = config.sim.n_per_group;
  spec.beta = Eigen::Map<const Eigen::VectorXd>(
      config.sim.beta.data(), static_cast<Eigen::Index>(config.sim.beta.size()));
  spec.sigma_u = config.sim.sigma_u;
  spec.theta = config.sim.theta;
  spec.add_dummy = config.sim.add_dummy;
  spec.seed = config.seed;

  const Simulated sim = simulate(spec);
  {
    auto out = open_output(fs::path(config.out_dir) / "sim" / "rows.csv");
    write_table_csv(out, simulated_to_table(sim));
  }
  {
    auto out = open_output(fs::path(config.out_dir) / "sim" / "truth.json");
    json u = json::array();
    for (Eigen::Index i = 0; i < sim.true_u.size(); ++i)
      u.push_back(sim.true_u(i));
    const json obj{{"beta", config.sim.beta},
                   {"sigma_u", spec.sigma_u},
                   {"theta", spec.theta},
                   {"seed", spec.seed},
                   {"true_u", u}};
    out << obj.dump(2) << '\n';
  }

  const FittedGlmm fitted = fit(sim.design, config.glmm);
  const RecoveryReport recovery = recovery_report(spec, fitted);
  {
    auto out = open_output(fs::path(config.out_dir) / "sim" / "recovery.txt");
    out << render_recovery_text(recovery);
  }
  {
    auto out = open_output(fs::path(config.out_dir) / "sim" / "recovery.csv");
    out << "parameter,truth,estimate,se,z,pass\n";
    char buf[200];
    for (const auto& r : recovery.rows) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%s\n",
                    r.name.c_str(), r.truth, r.estimate, r.se, r.z,
                    r.pass ? "true" : "false");
      out << buf;
    }
  }
  {
    auto out = open_output(fs::path(config.out_dir) / "sim" / "fit.json");
    save_glmm_json(out, fitted);
  }
  log << render_recovery_text(recovery);
  write_manifest(config.out_dir, "simulate", config, {},
                 {fs::path(config.out_dir) / "sim" / "rows.csv",
                  fs::path(config.out_dir) / "sim" / "recovery.csv"});
  return recovery.all_pass ? 0 : 1;
}

}  // namespace emm
