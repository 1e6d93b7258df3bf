#include <doctest.h>

#include <cmath>
#include <sstream>

#include "emm/design.hpp"
#include "emm/error.hpp"
#include "emm/rng.hpp"

using namespace emm;

TEST_CASE("group_mean_center") {
  SUBCASE("single group: between is zero, within is the deviation") {
    const std::vector<double> x{1, 2, 3};
    const std::vector<int> group{0, 0, 0};
    std::vector<double> within(3), between(3);
    group_mean_center(x, group, within, between);
    CHECK(within[0] == doctest::Approx(-1.0));
    CHECK(within[1] == doctest::Approx(0.0));
    CHECK(within[2] == doctest::Approx(1.0));
    for (double b : between) CHECK(b == doctest::Approx(0.0));
  }

  SUBCASE("constant within groups: within all zero") {
    const std::vector<double> x{5, 5, 9, 9};
    const std::vector<int> group{0, 0, 1, 1};
    std::vector<double> within(4), between(4);
    group_mean_center(x, group, within, between);
    for (double w : within) CHECK(w == doctest::Approx(0.0));
  }

  SUBCASE("two groups, hand-computed") {
    const std::vector<double> x{1, 3, 5, 7};
    const std::vector<int> group{0, 0, 1, 1};
    std::vector<double> within(4), between(4);
    double grand = 0.0;
    group_mean_center(x, group, within, between, &grand);
    CHECK(within == std::vector<double>{-1, 1, -1, 1});
    CHECK(between == std::vector<double>{-2, -2, 2, 2});
    CHECK(grand == doctest::Approx(4.0));
  }

  SUBCASE("1000 random instances: within sums to zero per group and "
          "within + between + grand mean reconstructs x") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(40);
      const int n_groups = 1 + static_cast<int>(rng.uniform_index(6));
      std::vector<double> x(n);
      std::vector<int> group(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal() * 3.0 + 1.0;
        group[i] = static_cast<int>(
            rng.uniform_index(static_cast<std::uint64_t>(n_groups)));
      }
      std::vector<double> within(n), between(n);
      double grand = 0.0;
      group_mean_center(x, group, within, between, &grand);

      std::vector<double> group_sum(static_cast<std::size_t>(n_groups), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        group_sum[static_cast<std::size_t>(group[i])] += within[i];
        CHECK(std::abs(within[i] + between[i] + grand - x[i]) < 1e-12);
      }
      for (double s : group_sum) CHECK(std::abs(s) < 1e-10);
    }
  }
}

TEST_CASE("standardize") {
  SUBCASE("constant column is an error") {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(standardize(x), Error);
  }
  SUBCASE("already standardized stays put") {
    Eigen::VectorXd x(2);
    x << -1, 1;
    const Standardized s = standardize(x);
    CHECK(s.mean == doctest::Approx(0.0));
    CHECK(s.sd == doctest::Approx(1.0));
    CHECK(s.z(0) == doctest::Approx(-1.0));
    CHECK(s.z(1) == doctest::Approx(1.0));
  }
  SUBCASE("population SD, hand-computed") {
    Eigen::VectorXd x(4);
    x << 1, 2, 3, 4;
    const Standardized s = standardize(x);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.sd == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
    CHECK(s.z(0) == doctest::Approx(-1.3416407865).epsilon(1e-9));
    CHECK(s.z(1) == doctest::Approx(-0.4472135955).epsilon(1e-9));
    CHECK(s.z(3) == doctest::Approx(1.3416407865).epsilon(1e-9));
  }
}

namespace {

Table small_table() {
  Table t;
  t.n_rows = 6;
  t.numeric["engagement"] = {0, 3, 1, 7, 2, 5};
  t.numeric["toxicity"] = {0.1, 0.3, 0.2, 0.6, 0.4, 0.5};
  t.numeric["has_url"] = {0, 1, 0, 1, 1, 0};
  t.numeric["n_followers"] = {100, 100, 100, 5000, 5000, 5000};
  t.categorical["influencer_id"] = {"a", "a", "a", "b", "b", "b"};
  t.categorical["kind"] = {"post", "quote", "reply", "post", "quote", "post"};
  t.categorical["topic"] = {"t1", "t2", "t1", "t1", "t2", "t1"};
  return t;
}

}  // namespace

TEST_CASE("encode") {
  SUBCASE("intercept-only spec gives a single column of ones") {
    ModelSpec spec;
    spec.label = "null";
    const DesignMatrix d = encode(small_table(), spec);
    CHECK(d.n_cols() == 1);
    CHECK(d.columns[0].role == ColumnRole::intercept);
    CHECK((d.X.col(0).array() == 1.0).all());
    CHECK(d.n_groups == 2);
    CHECK(d.y(3) == doctest::Approx(7.0));
  }

  SUBCASE("kind dummies: post is the reference") {
    ModelSpec spec;
    spec.variables.push_back({"kind", Transform::automatic, false, ""});
    const DesignMatrix d = encode(small_table(), spec);
    REQUIRE(d.n_cols() == 3);
    CHECK(d.columns[1].name == "kind_quote");
    CHECK(d.columns[2].name == "kind_reply");
    // rows: post, quote, reply -> [0,0], [1,0], [0,1]
    CHECK(d.X(0, 1) == 0.0);
    CHECK(d.X(0, 2) == 0.0);
    CHECK(d.X(1, 1) == 1.0);
    CHECK(d.X(1, 2) == 0.0);
    CHECK(d.X(2, 1) == 0.0);
    CHECK(d.X(2, 2) == 1.0);
    for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
      const double s = d.X(i, 1) + d.X(i, 2);
      CHECK((s == 0.0 || s == 1.0));
    }
  }

  SUBCASE("kind + toxicity + n_followers: 6 columns with centered pair") {
    ModelSpec spec;
    spec.variables.push_back({"kind", Transform::automatic, false, ""});
    spec.variables.push_back({"toxicity", Transform::automatic, false, ""});
    spec.variables.push_back({"n_followers", Transform::automatic, false, ""});
    const DesignMatrix d = encode(small_table(), spec);
    REQUIRE(d.n_cols() == 6);  // intercept + 2 kind + within/between + level2
    CHECK(d.columns[3].name == "toxicity_within");
    CHECK(d.columns[3].role == ColumnRole::within);
    CHECK(d.columns[4].name == "toxicity_between");
    CHECK(d.columns[4].role == ColumnRole::between);
    CHECK(d.columns[5].role == ColumnRole::level2);

    // Centered columns agree with the group_mean_center oracle after
    // standardization.
    const Table table = small_table();
    const auto& tox = table.numeric.at("toxicity");
    std::vector<double> within(6), between(6);
    group_mean_center(tox, d.group, within, between);
    const Standardized sw =
        standardize(Eigen::Map<Eigen::VectorXd>(within.data(), 6));
    for (Eigen::Index i = 0; i < 6; ++i)
      CHECK(d.X(i, 3) == doctest::Approx(sw.z(i)).epsilon(1e-12));

    // Within column sums to zero inside every group.
    double sum_a = 0, sum_b = 0;
    for (Eigen::Index i = 0; i < 6; ++i)
      (d.group[static_cast<std::size_t>(i)] == 0 ? sum_a : sum_b) += d.X(i, 3);
    CHECK(std::abs(sum_a) < 1e-10);
    CHECK(std::abs(sum_b) < 1e-10);

    // Centering constants are stored for invertibility.
    const auto& ci = d.centerings.at("toxicity");
    CHECK(ci.group_means.size() == 2);
    CHECK(ci.group_means[0] == doctest::Approx(0.2));
    CHECK(ci.group_means[1] == doctest::Approx(0.5));
    CHECK(ci.grand_mean == doctest::Approx(0.35));

    // n_followers is log10-scaled then standardized.
    CHECK(d.X(0, 5) < 0.0);
    CHECK(d.X(3, 5) > 0.0);
  }

  SUBCASE("row permutation permutes X rows identically") {
    ModelSpec spec;
    spec.variables.push_back({"kind", Transform::automatic, false, ""});
    spec.variables.push_back({"toxicity", Transform::automatic, false, ""});
    const Table t = small_table();
    const DesignMatrix d = encode(t, spec);

    Table permuted;
    permuted.n_rows = t.n_rows;
    const std::vector<std::size_t> perm{3, 1, 4, 0, 5, 2};
    for (const auto& [name, col] : t.numeric) {
      auto& out = permuted.numeric[name];
      for (std::size_t i : perm) out.push_back(col[i]);
    }
    for (const auto& [name, col] : t.categorical) {
      auto& out = permuted.categorical[name];
      for (std::size_t i : perm) out.push_back(col[i]);
    }
    const DesignMatrix dp = encode(permuted, spec);
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (Eigen::Index j = 0; j < d.n_cols(); ++j)
        CHECK(dp.X(static_cast<Eigen::Index>(i), j) ==
              doctest::Approx(d.X(static_cast<Eigen::Index>(perm[i]), j))
                  .epsilon(1e-12));
  }

  SUBCASE("unknown variables and all-reference categoricals") {
    ModelSpec spec;
    spec.variables.push_back({"no_such_column", Transform::automatic, false, ""});
    CHECK_THROWS_AS(encode(small_table(), spec), Error);

    Table t = small_table();
    t.categorical["kind"] = {"post", "post", "post", "post", "post", "post"};
    ModelSpec spec2;
    spec2.variables.push_back({"kind", Transform::automatic, false, ""});
    const DesignMatrix d = encode(t, spec2);
    CHECK(d.n_cols() == 1);  // intercept only
    REQUIRE(d.warnings.size() == 1);
    CHECK(d.warnings[0].find("kind") != std::string::npos);
  }

  SUBCASE("non-count response is rejected") {
    Table t = small_table();
    t.numeric["engagement"][0] = -1;
    CHECK_THROWS_AS(encode(t, ModelSpec{}), Error);
    t.numeric["engagement"][0] = 0.5;
    CHECK_THROWS_AS(encode(t, ModelSpec{}), Error);
  }

  SUBCASE("no column except the intercept has zero variance") {
    ModelSpec spec;
    spec.variables.push_back({"kind", Transform::automatic, false, ""});
    spec.variables.push_back({"toxicity", Transform::automatic, false, ""});
    spec.variables.push_back({"has_url", Transform::automatic, false, ""});
    const DesignMatrix d = encode(small_table(), spec);
    for (Eigen::Index j = 1; j < d.n_cols(); ++j) {
      const double first = d.X(0, j);
      CHECK_FALSE((d.X.col(j).array() == first).all());
    }
  }
}

TEST_CASE("table CSV round trip") {
  const Table t = small_table();
  std::ostringstream out;
  write_table_csv(out, t);
  std::istringstream in(out.str());
  const Table back = read_table_csv(in);
  CHECK(back.n_rows == t.n_rows);
  CHECK(back.numeric.at("toxicity") == t.numeric.at("toxicity"));
  CHECK(back.categorical.at("kind") == t.categorical.at("kind"));
}

TEST_CASE("design CSV and sidecar") {
  ModelSpec spec;
  spec.variables.push_back({"toxicity", Transform::automatic, false, ""});
  const DesignMatrix d = encode(small_table(), spec);
  std::ostringstream csv, sidecar;
  write_design_csv(csv, d);
  write_design_sidecar_json(sidecar, d);
  CHECK(csv.str().find("toxicity_within") != std::string::npos);
  CHECK(sidecar.str().find("group_means") != std::string::npos);
  CHECK(sidecar.str().find("\"role\": \"within\"") != std::string::npos);
}
