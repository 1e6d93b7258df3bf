#include <doctest.h>

#include <cmath>
#include <sstream>

#include "emm/error.hpp"
#include "emm/metrics.hpp"
#include "emm/simulate.hpp"

using namespace emm;

namespace {

// A minimal design with an intercept for the latent-scale variance formulas.
DesignMatrix intercept_design(int n) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(n, 1);
  d.y = Eigen::VectorXd::Zero(n);
  d.group.assign(static_cast<std::size_t>(n), 0);
  d.n_groups = 1;
  d.group_labels = {"g0"};
  d.columns.push_back({"(intercept)", "(intercept)", ColumnRole::intercept, 0.0, 1.0});
  return d;
}

FittedGlmm fake_fit(double beta0, double sigma_u2, double theta,
                    double loglik, int n_params) {
  FittedGlmm f;
  f.converged = true;
  f.beta = Eigen::VectorXd::Constant(1, beta0);
  f.se_beta = Eigen::VectorXd::Constant(1, 0.1);
  f.sigma_u2 = sigma_u2;
  f.theta = theta;
  f.loglik = loglik;
  f.n_params = n_params;
  f.column_names = {"(intercept)"};
  return f;
}

}  // namespace

TEST_CASE("aic") {
  CHECK(aic(0.0, 0) == doctest::Approx(0.0));
  CHECK(aic(-100.0, 3) == doctest::Approx(206.0));
  // Reference model-comparison arithmetic: 507,345 - 476,604 = 30,741.
  CHECK(507345.0 - 476604.0 == doctest::Approx(30741.0));
  const double base = aic(-100.0, 3);
  const double other = aic(-90.0, 3);
  // Ordering is invariant to a common loglik shift.
  CHECK((aic(-100.0 + 7.0, 3) < aic(-90.0 + 7.0, 3)) == (base < other));
  CHECK_THROWS_AS(aic(0.0, -1), Error);
}

TEST_CASE("level1_variance lognormal approximation") {
  const DesignMatrix d = intercept_design(10);
  SUBCASE("lambda = 1, theta = 1 gives ln 3") {
    const FittedGlmm f = fake_fit(0.0, 0.0, 1.0, 0.0, 3);
    CHECK(level1_variance(f, d) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("theta -> inf at lambda = 1 approaches ln 2") {
    const FittedGlmm f = fake_fit(0.0, 0.0, 1e12, 0.0, 3);
    CHECK(level1_variance(f, d) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
  SUBCASE("both large: variance vanishes") {
    const FittedGlmm f = fake_fit(30.0, 0.0, 1e12, 0.0, 3);
    CHECK(level1_variance(f, d) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("sigma_u2 enters through the latent mean") {
    const FittedGlmm f = fake_fit(-0.5, 1.0, 1.0, 0.0, 3);
    // lambda = exp(-0.5 + 0.5) = 1 again
    CHECK(level1_variance(f, d) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("trigamma variant sits above lognormal and converges with it") {
    const FittedGlmm moderate = fake_fit(2.0, 0.0, 5.0, 0.0, 3);
    const double ln_m = level1_variance(moderate, d, Level1Method::lognormal);
    const double tg_m = level1_variance(moderate, d, Level1Method::trigamma);
    CHECK(tg_m > ln_m);  // psi_1(1/v) > log(1+v) for v > 0
    const FittedGlmm large = fake_fit(5.0, 0.0, 100.0, 0.0, 3);
    const double ln_l = level1_variance(large, d, Level1Method::lognormal);
    const double tg_l = level1_variance(large, d, Level1Method::trigamma);
    CHECK(std::abs(ln_l - tg_l) < 1e-3);
  }
}

TEST_CASE("adjusted_icc") {
  // Reference values: the ratio of the rounded variances lands on the
  // reported ICC at its own precision.
  CHECK(adjusted_icc(3.63, 1.24) == doctest::Approx(0.745).epsilon(1e-3));
  CHECK(adjusted_icc(0.44, 0.89) == doctest::Approx(0.331).epsilon(1e-3));
  CHECK(adjusted_icc(0.0, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(adjusted_icc(0.0, 0.0), Error);
  CHECK_THROWS_AS(adjusted_icc(-1.0, 1.0), Error);
  // Scale invariance.
  for (double c : {0.1, 2.0, 1000.0})
    CHECK(adjusted_icc(c * 3.63, c * 1.24) ==
          doctest::Approx(adjusted_icc(3.63, 1.24)).epsilon(1e-12));
}

TEST_CASE("conditional_r2") {
  SUBCASE("intercept-only with no random variance explains nothing") {
    const DesignMatrix d = intercept_design(10);
    const FittedGlmm f = fake_fit(0.0, 0.0, 1.0, 0.0, 3);
    CHECK(conditional_r2(f, d) == doctest::Approx(0.0));
  }
  SUBCASE("var_fixed equal to level-1 variance gives one half") {
    DesignMatrix d = intercept_design(10);
    d.X.conservativeResize(Eigen::NoChange, 2);
    for (int i = 0; i < 10; ++i) d.X(i, 1) = (i % 2 == 0) ? -1.0 : 1.0;
    d.columns.push_back({"x", "x", ColumnRole::raw, 0.0, 1.0});
    FittedGlmm f = fake_fit(0.0, 0.0, 1.0, 0.0, 4);
    f.beta = Eigen::Vector2d(0.0, std::sqrt(std::log(3.0)));
    f.se_beta = Eigen::Vector2d(0.1, 0.1);
    f.column_names = {"(intercept)", "x"};
    CHECK(conditional_r2(f, d) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("irr_table") {
  DesignMatrix d = intercept_design(4);
  d.X.conservativeResize(Eigen::NoChange, 3);
  d.X.col(1) << 0, 1, 0, 1;
  d.X.col(2) << 1, 0, 1, 0;
  d.columns.push_back({"has_video", "has_video", ColumnRole::dummy, 0.0, 1.0});
  d.columns.push_back({"toxicity_within", "toxicity", ColumnRole::within, 0.0, 1.0});

  FittedGlmm f = fake_fit(0.3, 0.0, 1.0, 0.0, 5);
  f.beta = Eigen::Vector3d(0.3, 0.0, std::log(2.0));
  f.se_beta = Eigen::Vector3d(0.1, 0.05, 0.2);
  f.column_names = {"(intercept)", "has_video", "toxicity_within"};

  const auto rows = irr_table(f, d.columns);
  REQUIRE(rows.size() == 2);  // intercept skipped
  CHECK(rows[0].name == "Contains a video");
  CHECK(rows[0].irr == doctest::Approx(1.0));
  CHECK(rows[0].p == doctest::Approx(1.0));
  CHECK(rows[0].stars.empty());
  CHECK(rows[1].name == "Toxicity within");
  CHECK(rows[1].irr == doctest::Approx(2.0));

  SUBCASE("reciprocal coefficients give reciprocal IRRs") {
    FittedGlmm g = f;
    g.beta(2) = -f.beta(2);
    const auto neg = irr_table(g, d.columns);
    CHECK(neg[1].irr * rows[1].irr == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("significance stars follow the table codes") {
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.001) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.2) == "");
}

TEST_CASE("IRR row renders in the reference layout") {
  IrrRow row;
  row.name = "Contains a video";
  row.irr = 3.20;
  row.se = 0.05;
  row.p = 0.0002;
  row.stars = significance_stars(row.p);
  const auto cells = format_irr_cells(row);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == "Contains a video");
  CHECK(cells[1] == "3.20 ***");
  CHECK(cells[2] == "0.05");
}

TEST_CASE("compare_models") {
  const DesignMatrix d = intercept_design(10);

  SUBCASE("single model has delta zero") {
    const FittedGlmm f = fake_fit(0.1, 0.5, 1.0, -50.0, 3);
    const auto reports = compare_models({{"only", &f, &d}});
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].delta_aic == doctest::Approx(0.0));
    CHECK(reports[0].aic == doctest::Approx(aic(-50.0, 3)));
  }

  SUBCASE("two models: deltas 0 and -10") {
    const FittedGlmm a = fake_fit(0.1, 0.5, 1.0, -48.0, 2);  // AIC 100
    const FittedGlmm b = fake_fit(0.1, 0.5, 1.0, -43.0, 2);  // AIC 90
    const auto reports = compare_models({{"a", &a, &d}, {"b", &b, &d}});
    CHECK(reports[0].delta_aic == doctest::Approx(0.0));
    CHECK(reports[1].delta_aic == doctest::Approx(-10.0));
  }

  SUBCASE("mismatched datasets are rejected") {
    const FittedGlmm f = fake_fit(0.1, 0.5, 1.0, -50.0, 3);
    DesignMatrix other = intercept_design(10);
    other.y(0) = 5;
    CHECK_THROWS_AS(compare_models({{"a", &f, &d}, {"b", &f, &other}}), Error);
  }

  SUBCASE("adding a truly predictive variable improves AIC on synthetic data") {
    SimulationSpec spec;
    spec.n_groups = 10;
    spec.n_per_group = 60;
    spec.beta = Eigen::Vector2d(0.8, 0.6);
    spec.sigma_u = 0.7;
    spec.theta = 1.5;
    spec.seed = 88;
    const Simulated sim = simulate(spec);

    DesignMatrix null_design = sim.design;
    null_design.X = sim.design.X.leftCols(1);
    null_design.columns = {sim.design.columns[0]};

    GlmmOptions options;
    options.quad_order = 11;
    const FittedGlmm null_fit = fit(null_design, options);
    const FittedGlmm full_fit = fit(sim.design, options);
    const auto reports = compare_models(
        {{"null", &null_fit, &null_design}, {"full", &full_fit, &sim.design}});
    CHECK(reports[1].delta_aic < 0.0);
    CHECK(reports[1].level1_var > 0.0);
    CHECK(reports[1].adjusted_icc > 0.0);
    CHECK(reports[1].adjusted_icc < 1.0);
    CHECK(reports[1].conditional_r2 > reports[0].conditional_r2 - 1e-9);

    SUBCASE("renderers produce the four metric columns") {
      const std::string text = render_comparison_text(reports);
      CHECK(text.find("Adjusted ICC") != std::string::npos);
      CHECK(text.find("null") != std::string::npos);
      std::ostringstream csv;
      write_comparison_csv(csv, reports);
      CHECK(csv.str().find("delta_aic") != std::string::npos);
      std::ostringstream json_out;
      write_comparison_json(json_out, reports);
      CHECK(json_out.str().find("\"aic\"") != std::string::npos);
    }
  }
}
