#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "emm/design.hpp"
#include "emm/glmm.hpp"

namespace emm {

double aic(double loglik, int n_params);

enum class Level1Method { lognormal, trigamma };

// Distribution-specific residual variance on the latent log scale,
// ln(1 + 1/lambda + 1/theta) with lambda = exp(beta0 + sigma_u2/2)
// (trigamma variant behind the flag). Requires an intercept column.
double level1_variance(const FittedGlmm& fit, const DesignMatrix& design,
                       Level1Method method = Level1Method::lognormal);

// level2 / (level1 + level2).
double adjusted_icc(double level2_var, double level1_var);

// (var(X beta) + sigma_u2) / (var(X beta) + sigma_u2 + level1 variance).
double conditional_r2(const FittedGlmm& fit, const DesignMatrix& design,
                      Level1Method method = Level1Method::lognormal);

struct IrrRow {
  std::string name;      // display name, e.g. "Contains a video"
  double irr = 1.0;      // exp(beta)
  double se = 0.0;       // on the coefficient (log) scale
  double p = 1.0;        // two-sided Wald
  std::string stars;     // *** <= 0.001, ** <= 0.01, * <= 0.05
  bool reliable = true;
};

std::string significance_stars(double p);
std::string display_name(const ColumnInfo& column);

// One row per non-intercept coefficient, in design column order.
std::vector<IrrRow> irr_table(const FittedGlmm& fit,
                              const std::vector<ColumnInfo>& columns);

struct ModelReport {
  std::string label;
  double aic = 0.0;
  double delta_aic = 0.0;  // this model minus the baseline
  double level1_var = 0.0;
  double level2_var = 0.0;
  double adjusted_icc = 0.0;
  double conditional_r2 = 0.0;
  double loglik = 0.0;
  int n_params = 0;
};

struct ModelResult {
  std::string label;
  const FittedGlmm* fit = nullptr;
  const DesignMatrix* design = nullptr;
};

// Rows in input order; delta-AIC against the baseline row. All fits must
// share the same response and grouping.
std::vector<ModelReport> compare_models(const std::vector<ModelResult>& fits,
                                        std::size_t baseline = 0,
                                        Level1Method method = Level1Method::lognormal);

// Renderers: aligned text, CSV and JSON.
std::string render_comparison_text(const std::vector<ModelReport>& reports);
void write_comparison_csv(std::ostream& out,
                          const std::vector<ModelReport>& reports);
void write_comparison_json(std::ostream& out,
                           const std::vector<ModelReport>& reports);

// Cells for one IRR row: {name, "3.20 ***", "0.05"}.
std::vector<std::string> format_irr_cells(const IrrRow& row);
std::string render_irr_text(const std::vector<IrrRow>& rows,
                            const ModelReport* footer = nullptr);
void write_irr_csv(std::ostream& out, const std::vector<IrrRow>& rows);
void write_irr_json(std::ostream& out, const std::vector<IrrRow>& rows,
                    const ModelReport* footer = nullptr);

}  // namespace emm
