// The OpenMP kernels must be bit-identical to their serial references: each
// fills a per-unit buffer and reduces in fixed order.
#include <doctest.h>

#include "emm/features.hpp"
#include "emm/glmm.hpp"
#include "emm/lda_eval.hpp"
#include "emm/simulate.hpp"
#include "support/lda_fixtures.hpp"

using namespace emm;

TEST_CASE("total_loglik: serial and parallel agree bitwise") {
  SimulationSpec spec;
  spec.n_groups = 12;
  spec.n_per_group = 50;
  spec.beta = Eigen::Vector3d(0.9, 0.4, -0.2);
  spec.sigma_u = 0.9;
  spec.theta = 1.3;
  spec.seed = 19;
  const Simulated sim = simulate(spec);

  GlmmParams params;
  params.beta = Eigen::Vector3d(0.8, 0.35, -0.15);
  params.sigma_u2 = 0.7;
  params.theta = 1.2;

  const double serial =
      total_loglik(sim.design, params, 15, Execution::serial);
  const double parallel =
      total_loglik(sim.design, params, 15, Execution::parallel);
  CHECK(serial == parallel);

  const LoglikGradient gs =
      total_loglik_grad(sim.design, params, 15, Execution::serial);
  const LoglikGradient gp =
      total_loglik_grad(sim.design, params, 15, Execution::parallel);
  CHECK(gs.value == gp.value);
  CHECK(gs.grad_beta == gp.grad_beta);
  CHECK(gs.grad_sigma_u2 == gp.grad_sigma_u2);
  CHECK(gs.grad_theta == gp.grad_theta);
}

TEST_CASE("build_rows: serial and parallel agree") {
  std::vector<RawEntry> entries(200);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].id = "e" + std::to_string(i);
    entries[i].influencer_id = "inf" + std::to_string(i % 3);
    entries[i].created_at = 1594166400 + static_cast<std::int64_t>(i) * 3600;
    entries[i].text = "good bad #x " + std::to_string(i) + (i % 2 ? "!" : "?");
    entries[i].kind = i % 3 == 0 ? EntryKind::post : EntryKind::reply;
  }
  Lexicon lexicon{{"good", Polarity::positive}, {"bad", Polarity::negative}};
  ConstantToxicity toxicity(0.1);
  FeatureConfig fc;
  fc.lexicon = &lexicon;
  fc.toxicity = &toxicity;
  std::unordered_map<std::string, std::int64_t> counts{{"e1", 5}, {"e7", 2}};

  const auto serial = build_rows(entries, counts, {}, fc, Execution::serial);
  const auto parallel =
      build_rows(entries, counts, {}, fc, Execution::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].entry_id == parallel[i].entry_id);
    CHECK(serial[i].engagement_count == parallel[i].engagement_count);
    CHECK(serial[i].features.n_chars == parallel[i].features.n_chars);
    CHECK(serial[i].features.n_positive == parallel[i].features.n_positive);
    CHECK(serial[i].features.hour_of_day == parallel[i].features.hour_of_day);
  }
}

TEST_CASE("cross_validate: serial and parallel agree") {
  const Corpus corpus = golden::disjoint_two_topic_corpus(4, 20, 47);
  const LdaRunOptions run{60, 20, 3};
  const auto serial =
      cross_validate(corpus, {1, 2}, 0.1, 0.1, 2, 5, run, Execution::serial);
  const auto parallel =
      cross_validate(corpus, {1, 2}, 0.1, 0.1, 2, 5, run, Execution::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].k == parallel[i].k);
    CHECK(serial[i].fold == parallel[i].fold);
    CHECK(serial[i].held_out_loglik == parallel[i].held_out_loglik);
    CHECK(serial[i].mean_coherence == parallel[i].mean_coherence);
  }
}
