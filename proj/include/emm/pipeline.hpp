#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "emm/design.hpp"
#include "emm/glmm.hpp"
#include "emm/io.hpp"

namespace emm {

struct ToxicityConfig {
  std::string mode = "column";  // column | constant | wordlist
  std::string path;             // entry_id,score CSV (column mode)
  double constant = 0.0;
  std::string missing = "error";  // error | impute
  std::string wordlist;           // one flagged word per line (wordlist mode)
};

struct TopicsConfig {
  std::vector<int> k_grid{5, 10, 20, 40};
  std::vector<double> alpha_grid{0.01, 0.05, 0.1, 0.5};
  std::vector<double> beta_grid{0.001, 0.01, 0.1};
  double alpha = 0.1;  // used while optimizing k
  double beta = 0.1;
  int folds = 5;
  int iterations = 1000;
  int burn_in = 200;
  int top_n = 5;
  std::string merge_map;   // topic,label CSV; empty = identity labels
  double threshold = 0.0;  // dominant assignments at or below are flagged
};

struct SimulateConfig {
  int n_groups = 40;
  int n_per_group = 200;
  std::vector<double> beta{1.0, 0.5, -0.3};
  double sigma_u = 1.0;
  double theta = 1.5;
  bool add_dummy = false;
};

struct RunConfig {
  std::string entries_path;
  std::string events_path;
  std::string influencers_path;
  std::string followers_path;
  Format entries_format = Format::jsonl;
  Format events_format = Format::jsonl;

  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  int engagement_window_days = 7;

  std::string lexicon_path;
  std::string patterns_path;
  std::string stopwords_path;
  ToxicityConfig toxicity;
  bool strip_urls_in_char_count = false;

  TopicsConfig topics;
  std::vector<ModelSpec> models;
  GlmmOptions glmm;
  EncodeOptions encode;
  SimulateConfig sim;

  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int jobs = 0;
  bool strict = false;
};

// The paper-shaped eight-model ladder over the standard variable sets.
std::vector<ModelSpec> default_model_specs();
RunConfig default_config();

RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& config);
RunConfig load_config_file(const std::filesystem::path& path);

// FNV-1a 64 content hash (hex); cache fingerprinting, not cryptographic.
std::string fnv1a_hex(std::string_view bytes);
std::string hash_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

// Command bodies; each returns the number of recorded failures (0 = success)
// and logs one line per artifact to log.
int cmd_ingest(const RunConfig& config, std::ostream& log);
int cmd_featurize(const RunConfig& config, std::ostream& log);
int cmd_topics(const RunConfig& config, std::ostream& log);
int cmd_fit(const RunConfig& config, std::ostream& log);
int cmd_compare(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);

}  // namespace emm
