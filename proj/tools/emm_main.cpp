// Batch front-end: ingest -> featurize -> topics -> fit, plus simulate and
// report, all driven by one JSON config.
#include <CLI11.hpp>
#include <iostream>

#include "emm/error.hpp"
#include "emm/parallel.hpp"
#include "emm/pipeline.hpp"
#include "emm/version.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
  bool strict = false;
};

emm::RunConfig resolve_config(const GlobalArgs& args) {
  emm::RunConfig config = args.config_path.empty()
                              ? emm::default_config()
                              : emm::load_config_file(args.config_path);
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (args.seed_set) config.seed = args.seed;
  if (args.jobs >= 0) config.jobs = args.jobs;
  if (args.strict) config.strict = true;
  emm::set_global_jobs(config.jobs);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel engagement modeling toolkit"};
  app.set_version_flag("--version", emm::kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON config file")
      ->envname("EMM_CONFIG");
  app.add_option("--out", args.out_dir, "output directory (overrides config)")
      ->envname("EMM_OUT");
  auto* seed_opt =
      app.add_option("--seed", args.seed, "global seed (overrides config)")
          ->envname("EMM_SEED");
  app.add_option("--jobs", args.jobs, "worker threads, 0 = all cores")
      ->envname("EMM_JOBS");
  app.add_flag("--strict", args.strict, "treat malformed records as fatal")
      ->envname("EMM_STRICT");

  int (*command)(const emm::RunConfig&, std::ostream&) = nullptr;
  app.add_subcommand("ingest", "load entries/events, filter, count engagement")
      ->callback([&] { command = emm::cmd_ingest; });
  app.add_subcommand("featurize", "compute tweet-level features into rows.csv")
      ->callback([&] { command = emm::cmd_featurize; });
  app.add_subcommand("topics", "fit and validate the topic model")
      ->callback([&] { command = emm::cmd_topics; });
  app.add_subcommand("fit", "fit the configured model ladder, emit tables")
      ->callback([&] { command = emm::cmd_fit; });
  app.add_subcommand("compare", "re-render the model comparison table")
      ->callback([&] { command = emm::cmd_compare; });
  app.add_subcommand("report", "re-render comparison and IRR tables")
      ->callback([&] { command = emm::cmd_report; });
  app.add_subcommand("simulate", "generate synthetic data and check recovery")
      ->callback([&] { command = emm::cmd_simulate; });
  auto* show = app.add_subcommand("show-config", "print the effective config");

  CLI11_PARSE(app, argc, argv);
  args.seed_set = seed_opt->count() > 0 || std::getenv("EMM_SEED") != nullptr;

  try {
    const emm::RunConfig config = resolve_config(args);
    if (show->parsed()) {
      std::cout << emm::config_to_json_text(config) << '\n';
      return 0;
    }
    const int failures = command(config, std::cout);
    if (failures != 0) {
      std::cerr << "completed with " << failures << " failure(s)\n";
      return 1;
    }
    return 0;
  } catch (const emm::NonConvergence& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    for (const auto& t : ex.trace)
      std::cerr << "  iter " << t.iteration << ": loglik " << t.loglik
                << ", grad " << t.grad_norm << ", step " << t.step_norm << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
}
