#include "emm/lda.hpp"

#include <json.hpp>
#include <ostream>

#include "emm/error.hpp"
#include "emm/rng.hpp"

namespace emm {

using nlohmann::json;

TopicModelFit fit_lda(const Corpus& corpus, int k, double alpha, double beta,
                      int n_iterations, int burn_in, std::uint64_t seed) {
  if (k < 1) throw Error("fit_lda: k must be >= 1");
  if (alpha <= 0.0 || beta <= 0.0)
    throw Error("fit_lda: alpha and beta must be positive");
  if (n_iterations < 1 || burn_in < 0 || burn_in >= n_iterations)
    throw Error("fit_lda: need n_iterations > burn_in >= 0");
  const int v = static_cast<int>(corpus.vocab_size());
  const int n_docs = static_cast<int>(corpus.n_docs());
  if (corpus.n_tokens() == 0) throw Error("fit_lda: corpus has no tokens");

  TopicModelFit fit;
  fit.k = k;
  fit.alpha = alpha;
  fit.beta = beta;
  fit.seed = seed;
  fit.iterations = n_iterations;
  fit.burn_in = burn_in;
  fit.vocabulary = corpus.vocabulary;
  fit.doc_ids = corpus.doc_ids;
  if (k > v)
    fit.warnings.push_back("k exceeds vocabulary size; topics will degenerate");

  Rng rng(seed);

  std::vector<std::vector<int>> z(corpus.docs.size());
  std::vector<int> n_dk(static_cast<std::size_t>(n_docs) * k, 0);
  std::vector<int> n_kw(static_cast<std::size_t>(k) * v, 0);
  std::vector<int> n_k(k, 0);

  for (int d = 0; d < n_docs; ++d) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
    z[static_cast<std::size_t>(d)].resize(doc.size());
    for (std::size_t t = 0; t < doc.size(); ++t) {
      const int topic = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
      z[static_cast<std::size_t>(d)][t] = topic;
      ++n_dk[static_cast<std::size_t>(d) * k + topic];
      ++n_kw[static_cast<std::size_t>(topic) * v + doc[t]];
      ++n_k[topic];
    }
  }

  const double v_beta = v * beta;
  std::vector<double> weights(static_cast<std::size_t>(k));
  Eigen::MatrixXd phi_acc = Eigen::MatrixXd::Zero(k, v);
  Eigen::MatrixXd theta_acc = Eigen::MatrixXd::Zero(n_docs, k);
  int n_acc = 0;

  const auto accumulate = [&]() {
    for (int t = 0; t < k; ++t) {
      const double denom = n_k[t] + v_beta;
      for (int w = 0; w < v; ++w)
        phi_acc(t, w) += (n_kw[static_cast<std::size_t>(t) * v + w] + beta) / denom;
    }
    for (int d = 0; d < n_docs; ++d) {
      const double nd = static_cast<double>(corpus.docs[static_cast<std::size_t>(d)].size());
      const double denom = nd + k * alpha;
      for (int t = 0; t < k; ++t)
        theta_acc(d, t) += (n_dk[static_cast<std::size_t>(d) * k + t] + alpha) / denom;
    }
    ++n_acc;
  };

  for (int sweep = 1; sweep <= n_iterations; ++sweep) {
    for (int d = 0; d < n_docs; ++d) {
      const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
      auto& zd = z[static_cast<std::size_t>(d)];
      for (std::size_t t = 0; t < doc.size(); ++t) {
        const int w = doc[t];
        const int old_topic = zd[t];
        --n_dk[static_cast<std::size_t>(d) * k + old_topic];
        --n_kw[static_cast<std::size_t>(old_topic) * v + w];
        --n_k[old_topic];

        double total = 0.0;
        for (int topic = 0; topic < k; ++topic) {
          const double p =
              (n_dk[static_cast<std::size_t>(d) * k + topic] + alpha) *
              (n_kw[static_cast<std::size_t>(topic) * v + w] + beta) /
              (n_k[topic] + v_beta);
          weights[static_cast<std::size_t>(topic)] = p;
          total += p;
        }
        double r = rng.uniform() * total;
        int new_topic = k - 1;
        for (int topic = 0; topic < k; ++topic) {
          r -= weights[static_cast<std::size_t>(topic)];
          if (r <= 0.0) {
            new_topic = topic;
            break;
          }
        }
        zd[t] = new_topic;
        ++n_dk[static_cast<std::size_t>(d) * k + new_topic];
        ++n_kw[static_cast<std::size_t>(new_topic) * v + w];
        ++n_k[new_topic];
      }
    }
    if (sweep > burn_in && (sweep - burn_in) % 10 == 0) accumulate();
  }
  if (n_acc == 0) accumulate();  // short runs still get the final state

  fit.phi = phi_acc / static_cast<double>(n_acc);
  fit.theta = theta_acc / static_cast<double>(n_acc);
  return fit;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = rows.size();
  const auto c = r ? rows.at(0).size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows.at(i).at(j).get<double>();
  return m;
}

}  // namespace

void save_fit_json(std::ostream& out, const TopicModelFit& fit) {
  const json obj{{"k", fit.k},
                 {"alpha", fit.alpha},
                 {"beta", fit.beta},
                 {"seed", fit.seed},
                 {"iterations", fit.iterations},
                 {"burn_in", fit.burn_in},
                 {"vocabulary", fit.vocabulary},
                 {"doc_ids", fit.doc_ids},
                 {"phi", matrix_to_json(fit.phi)},
                 {"theta", matrix_to_json(fit.theta)},
                 {"warnings", fit.warnings}};
  out << obj.dump() << '\n';
}

TopicModelFit load_fit_json(std::istream& in) {
  json obj;
  in >> obj;
  TopicModelFit fit;
  fit.k = obj.at("k").get<int>();
  fit.alpha = obj.at("alpha").get<double>();
  fit.beta = obj.at("beta").get<double>();
  fit.seed = obj.at("seed").get<std::uint64_t>();
  fit.iterations = obj.at("iterations").get<int>();
  fit.burn_in = obj.at("burn_in").get<int>();
  fit.vocabulary = obj.at("vocabulary").get<std::vector<std::string>>();
  fit.doc_ids = obj.at("doc_ids").get<std::vector<std::string>>();
  fit.phi = matrix_from_json(obj.at("phi"));
  fit.theta = matrix_from_json(obj.at("theta"));
  fit.warnings = obj.value("warnings", std::vector<std::string>{});
  return fit;
}

}  // namespace emm
