#include "emm/lda_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "emm/error.hpp"
#include "emm/rng.hpp"

namespace emm {

namespace {

// EM fold-in for one document's topic weights given fixed phi.
Eigen::VectorXd fold_in_theta(const TopicModelFit& fit,
                              const std::vector<int>& tokens) {
  const int k = fit.k;
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(k, 1.0 / k);
  if (tokens.empty()) return theta;
  Eigen::VectorXd counts(k);
  for (int iter = 0; iter < 200; ++iter) {
    counts.setConstant(fit.alpha);
    for (int w : tokens) {
      Eigen::VectorXd r = theta.cwiseProduct(fit.phi.col(w));
      const double total = r.sum();
      if (total <= 0.0) continue;
      counts += r / total;
    }
    Eigen::VectorXd next = counts / counts.sum();
    const double delta = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    if (delta < 1e-12) break;
  }
  return theta;
}

}  // namespace

double held_out_loglik(const TopicModelFit& fit, const Corpus& held_out,
                       HeldOutReport* report) {
  if (held_out.n_docs() == 0) throw Error("held_out_loglik: empty held-out set");
  std::unordered_map<std::string, int> vocab;
  vocab.reserve(fit.vocabulary.size());
  for (std::size_t i = 0; i < fit.vocabulary.size(); ++i)
    vocab[fit.vocabulary[i]] = static_cast<int>(i);

  HeldOutReport local;
  double total = 0.0;
  for (const auto& doc : held_out.docs) {
    std::vector<int> mapped;
    mapped.reserve(doc.size());
    for (int w : doc) {
      const auto it = vocab.find(held_out.vocabulary[static_cast<std::size_t>(w)]);
      if (it == vocab.end()) {
        ++local.oov_dropped;
        continue;
      }
      mapped.push_back(it->second);
    }
    const std::size_t half = mapped.size() / 2;
    const std::vector<int> estimate(mapped.begin(),
                                    mapped.begin() + static_cast<std::ptrdiff_t>(half));
    const Eigen::VectorXd theta = fold_in_theta(fit, estimate);
    for (std::size_t t = half; t < mapped.size(); ++t) {
      const double p = theta.dot(fit.phi.col(mapped[t]));
      total += std::log(p);
      ++local.tokens_scored;
    }
  }
  if (report) *report = local;
  return total;
}

std::vector<double> coherence(const TopicModelFit& fit, const Corpus& corpus,
                              int top_n) {
  if (top_n < 2) throw Error("coherence: top_n must be >= 2");
  const int v = static_cast<int>(fit.phi.cols());
  if (top_n > v) throw Error("coherence: top_n exceeds vocabulary");

  // Word -> set of documents, on the scoring corpus (mapped by string so a
  // different vocabulary order still works).
  std::unordered_map<std::string, int> fit_vocab;
  for (std::size_t i = 0; i < fit.vocabulary.size(); ++i)
    fit_vocab[fit.vocabulary[i]] = static_cast<int>(i);
  std::unordered_map<int, std::unordered_set<std::size_t>> doc_sets;
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (int w : corpus.docs[d]) {
      const auto it = fit_vocab.find(corpus.vocabulary[static_cast<std::size_t>(w)]);
      if (it != fit_vocab.end()) doc_sets[it->second].insert(d);
    }
  }

  std::vector<double> out(static_cast<std::size_t>(fit.k), 0.0);
  for (int t = 0; t < fit.k; ++t) {
    std::vector<int> order(static_cast<std::size_t>(v));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fit.phi(t, a) > fit.phi(t, b);
    });
    order.resize(static_cast<std::size_t>(top_n));

    double score = 0.0;
    for (int m = 1; m < top_n; ++m) {
      for (int l = 0; l < m; ++l) {
        const auto& dm = doc_sets[order[static_cast<std::size_t>(m)]];
        const auto& dl = doc_sets[order[static_cast<std::size_t>(l)]];
        if (dl.empty())
          throw Error("coherence: top word never occurs in corpus");
        std::size_t co = 0;
        const auto& small = dm.size() < dl.size() ? dm : dl;
        const auto& big = dm.size() < dl.size() ? dl : dm;
        for (std::size_t d : small)
          if (big.count(d)) ++co;
        score += std::log((static_cast<double>(co) + 1.0) /
                          static_cast<double>(dl.size()));
      }
    }
    out[static_cast<std::size_t>(t)] = score;
  }
  return out;
}

std::vector<std::size_t> fold_assignment(std::size_t n_docs, int folds,
                                         std::uint64_t seed) {
  std::vector<std::size_t> order(n_docs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xF01D));
  for (std::size_t i = n_docs; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::size_t> fold(n_docs);
  for (std::size_t pos = 0; pos < n_docs; ++pos)
    fold[order[pos]] = pos % static_cast<std::size_t>(folds);
  return fold;
}

std::vector<CvRow> cross_validate(const Corpus& corpus,
                                  const std::vector<int>& k_grid, double alpha,
                                  double beta, int folds, std::uint64_t seed,
                                  const LdaRunOptions& run, Execution exec) {
  if (folds < 2) throw Error("cross_validate: folds must be >= 2");
  if (corpus.n_docs() < static_cast<std::size_t>(folds))
    throw Error("cross_validate: fewer documents than folds");
  if (k_grid.empty()) throw Error("cross_validate: empty k grid");

  const auto fold = fold_assignment(corpus.n_docs(), folds, seed);

  struct Cell {
    int k;
    int fold;
  };
  std::vector<Cell> cells;
  for (int k : k_grid)
    for (int f = 0; f < folds; ++f) cells.push_back({k, f});

  std::vector<CvRow> rows(cells.size());
  std::exception_ptr failure;
  const auto n_cells = static_cast<std::int64_t>(cells.size());

#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (std::int64_t c = 0; c < n_cells; ++c) {
    try {
      const Cell cell = cells[static_cast<std::size_t>(c)];
      std::vector<std::size_t> train, eval;
      for (std::size_t d = 0; d < corpus.n_docs(); ++d) {
        if (fold[d] == static_cast<std::size_t>(cell.fold))
          eval.push_back(d);
        else
          train.push_back(d);
      }
      const Corpus train_corpus = subset_corpus(corpus, train);
      const Corpus eval_corpus = subset_corpus(corpus, eval);
      const std::uint64_t cell_seed = derive_seed(
          seed, static_cast<std::uint64_t>(cell.k) * 1000 +
                    static_cast<std::uint64_t>(cell.fold));
      const TopicModelFit fit =
          fit_lda(train_corpus, cell.k, alpha, beta, run.n_iterations,
                  run.burn_in, cell_seed);
      CvRow row;
      row.k = cell.k;
      row.fold = cell.fold;
      row.held_out_loglik = held_out_loglik(fit, eval_corpus);
      const auto coh = coherence(fit, train_corpus, run.coherence_top_n);
      row.mean_coherence =
          std::accumulate(coh.begin(), coh.end(), 0.0) /
          static_cast<double>(coh.size());
      rows[static_cast<std::size_t>(c)] = row;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(rows.begin(), rows.end(), [](const CvRow& a, const CvRow& b) {
    return a.k != b.k ? a.k < b.k : a.fold < b.fold;
  });
  return rows;
}

std::vector<IntrusionItem> intrusion_items(const TopicModelFit& fit,
                                           const Corpus& corpus,
                                           std::uint64_t seed) {
  (void)corpus;
  const int v = static_cast<int>(fit.phi.cols());
  if (v < 6) throw Error("intrusion_items: vocabulary too small");
  const int decile = std::max(1, v / 10);

  // Rank words per topic once: order[t] descending by phi.
  std::vector<std::vector<int>> order(static_cast<std::size_t>(fit.k));
  std::vector<std::vector<char>> in_top_decile(
      static_cast<std::size_t>(fit.k), std::vector<char>(static_cast<std::size_t>(v), 0));
  for (int t = 0; t < fit.k; ++t) {
    auto& ord = order[static_cast<std::size_t>(t)];
    ord.resize(static_cast<std::size_t>(v));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
      return fit.phi(t, a) > fit.phi(t, b);
    });
    for (int i = 0; i < decile; ++i)
      in_top_decile[static_cast<std::size_t>(t)][static_cast<std::size_t>(ord[static_cast<std::size_t>(i)])] = 1;
  }

  std::vector<IntrusionItem> items;
  for (int t = 0; t < fit.k; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto& ord = order[static_cast<std::size_t>(t)];
    std::vector<int> top5(ord.begin(), ord.begin() + 5);

    std::vector<int> candidates;
    for (int i = v - decile; i < v; ++i) {
      const int w = ord[static_cast<std::size_t>(i)];
      for (int other = 0; other < fit.k; ++other) {
        if (other == t) continue;
        if (in_top_decile[static_cast<std::size_t>(other)][static_cast<std::size_t>(w)]) {
          candidates.push_back(w);
          break;
        }
      }
    }
    if (candidates.empty()) {
      // No other topic to borrow from (k = 1, or disjoint deciles): any
      // bottom-decile word outside this topic's top five.
      for (int i = v - decile; i < v; ++i) {
        const int w = ord[static_cast<std::size_t>(i)];
        if (std::find(top5.begin(), top5.end(), w) == top5.end())
          candidates.push_back(w);
      }
    }
    if (candidates.empty())
      throw Error("intrusion_items: no intruder candidates for topic " +
                  std::to_string(t));
    const int intruder =
        candidates[rng.uniform_index(candidates.size())];

    std::vector<int> slate = top5;
    slate.push_back(intruder);
    for (std::size_t i = slate.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(slate[i - 1], slate[j]);
    }
    IntrusionItem item;
    item.topic = t;
    for (std::size_t i = 0; i < 6; ++i) {
      item.words[i] = fit.vocabulary[static_cast<std::size_t>(slate[i])];
      if (slate[i] == intruder) item.intruder_pos = static_cast<int>(i);
    }
    items.push_back(std::move(item));
  }
  return items;
}

MergedTopics merge_topics(const TopicModelFit& fit,
                          const std::map<int, std::string>& mapping) {
  // Stable label order: first appearance scanning topics 0..k-1.
  std::vector<std::string> label_of_topic(static_cast<std::size_t>(fit.k));
  for (int t = 0; t < fit.k; ++t) {
    const auto it = mapping.find(t);
    label_of_topic[static_cast<std::size_t>(t)] =
        it != mapping.end() ? it->second : std::string("unlabeled");
  }
  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> label_index;
  for (const auto& l : label_of_topic) {
    if (label_index.emplace(l, labels.size()).second) labels.push_back(l);
  }

  MergedTopics out;
  const auto n_docs = static_cast<std::size_t>(fit.theta.rows());
  out.labels.resize(n_docs);
  out.masses.resize(n_docs);
  std::vector<double> mass(labels.size());
  for (std::size_t d = 0; d < n_docs; ++d) {
    std::fill(mass.begin(), mass.end(), 0.0);
    for (int t = 0; t < fit.k; ++t)
      mass[label_index[label_of_topic[static_cast<std::size_t>(t)]]] +=
          fit.theta(static_cast<Eigen::Index>(d), t);
    std::size_t best = 0;
    for (std::size_t l = 1; l < mass.size(); ++l)
      if (mass[l] > mass[best]) best = l;
    out.labels[d] = labels[best];
    out.masses[d] = mass[best];
  }
  return out;
}

}  // namespace emm
