// Serial vs OpenMP timing for the data-parallel kernels: the grouped marginal
// likelihood (value and gradient) and batch featurization.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "emm/features.hpp"
#include "emm/glmm.hpp"
#include "emm/parallel.hpp"
#include "emm/simulate.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_ms(F&& body, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    body();
    const auto t1 = Clock::now();
    best = std::min(
        best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 0;
  if (argc > 1) threads = std::stoi(argv[1]);
  emm::set_global_jobs(threads);
#ifdef _OPENMP
  std::printf("threads: %d\n", emm::effective_jobs(threads));
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif

  emm::SimulationSpec spec;
  spec.n_groups = 64;
  spec.n_per_group = 500;
  spec.beta = Eigen::Vector3d(1.0, 0.5, -0.3);
  spec.sigma_u = 1.0;
  spec.theta = 1.5;
  spec.seed = 42;
  const emm::Simulated sim = emm::simulate(spec);

  emm::GlmmParams params;
  params.beta = Eigen::Vector3d(0.9, 0.45, -0.25);
  params.sigma_u2 = 0.8;
  params.theta = 1.3;

  volatile double sink = 0.0;
  const double value_serial = time_ms(
      [&] {
        sink = emm::total_loglik(sim.design, params, 15,
                                 emm::Execution::serial);
      },
      5);
  const double value_parallel = time_ms(
      [&] {
        sink = emm::total_loglik(sim.design, params, 15,
                                 emm::Execution::parallel);
      },
      5);
  const double grad_serial = time_ms(
      [&] {
        sink = emm::total_loglik_grad(sim.design, params, 15,
                                      emm::Execution::serial)
                   .value;
      },
      5);
  const double grad_parallel = time_ms(
      [&] {
        sink = emm::total_loglik_grad(sim.design, params, 15,
                                      emm::Execution::parallel)
                   .value;
      },
      5);

  // Featurization payload: synthetic texts of mixed shape.
  std::vector<emm::RawEntry> entries(20000);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    emm::RawEntry& e = entries[i];
    e.id = "e" + std::to_string(i);
    e.influencer_id = "inf" + std::to_string(i % 20);
    e.created_at = 1594166400 + static_cast<std::int64_t>(i) * 61;
    e.text = "Why is nobody talking about this?! #topic" +
             std::to_string(i % 7) + " great bad news again " +
             std::string(i % 5, '!') + " please RT";
    e.kind = emm::EntryKind::post;
  }
  emm::Lexicon lexicon{{"great", emm::Polarity::positive},
                       {"bad", emm::Polarity::negative},
                       {"news", emm::Polarity::negative}};
  emm::ConstantToxicity toxicity(0.2);
  emm::FeatureConfig fc;
  fc.lexicon = &lexicon;
  fc.toxicity = &toxicity;
  std::unordered_map<std::string, std::int64_t> counts;

  const double feat_serial = time_ms(
      [&] {
        sink = static_cast<double>(
            emm::build_rows(entries, counts, {}, fc, emm::Execution::serial)
                .size());
      },
      3);
  const double feat_parallel = time_ms(
      [&] {
        sink = static_cast<double>(
            emm::build_rows(entries, counts, {}, fc, emm::Execution::parallel)
                .size());
      },
      3);
  (void)sink;

  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial", "openmp", "speedup");
  const auto row = [](const char* name, double s, double p) {
    std::printf("%-28s %8.2fms %8.2fms %7.2fx\n", name, s, p, s / p);
  };
  row("total_loglik (order 15)", value_serial, value_parallel);
  row("total_loglik_grad", grad_serial, grad_parallel);
  row("featurize 20k entries", feat_serial, feat_parallel);
  return 0;
}
