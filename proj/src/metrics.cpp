#include "emm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "emm/error.hpp"
#include "emm/special.hpp"

namespace emm {

double aic(double loglik, int n_params) {
  if (n_params < 0) throw Error("aic: negative parameter count");
  return 2.0 * n_params - 2.0 * loglik;
}

double level1_variance(const FittedGlmm& fit, const DesignMatrix& design,
                       Level1Method method) {
  const int icol = design.intercept_column();
  if (icol < 0) throw Error("level1_variance: design has no intercept");
  const double lambda = std::exp(fit.beta(icol) + fit.sigma_u2 / 2.0);
  const double inv = 1.0 / lambda + 1.0 / fit.theta;
  switch (method) {
    case Level1Method::lognormal:
      return std::log1p(inv);
    case Level1Method::trigamma:
      return trigamma(1.0 / inv);
  }
  return std::log1p(inv);
}

double adjusted_icc(double level2_var, double level1_var) {
  if (level2_var < 0.0 || level1_var < 0.0)
    throw Error("adjusted_icc: variances must be nonnegative");
  const double total = level1_var + level2_var;
  if (total == 0.0) throw Error("adjusted_icc: both variances are zero");
  return level2_var / total;
}

double conditional_r2(const FittedGlmm& fit, const DesignMatrix& design,
                      Level1Method method) {
  const Eigen::VectorXd eta = design.X * fit.beta;
  const double mean = eta.mean();
  const double var_fixed = (eta.array() - mean).square().mean();
  const double level1 = level1_variance(fit, design, method);
  return (var_fixed + fit.sigma_u2) /
         (var_fixed + fit.sigma_u2 + level1);
}

std::string significance_stars(double p) {
  if (p <= 0.001) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "";
}

std::string display_name(const ColumnInfo& column) {
  static const std::map<std::string, std::string> names{
      {"kind_quote", "Is a quote"},
      {"kind_reply", "Is a reply"},
      {"has_url", "Contains a url"},
      {"has_image", "Contains an image"},
      {"has_video", "Contains a video"},
      {"has_gif", "Contains gif"},
      {"requests_retweet", "Requests a Retweet"},
      {"n_followers", "N followers"},
      {"followers_mean_statuses", "Followers' mean statuses count"},
      {"pct_verified_followers", "% verified followers"},
  };
  const auto it = names.find(column.name);
  if (it != names.end()) return it->second;
  static const std::map<std::string, std::string> sources{
      {"toxicity", "Toxicity"},
      {"n_chars", "Length"},
      {"n_exclaim", "N exclamation marks"},
      {"n_question", "N question marks"},
      {"n_hashtags", "N hashtags"},
      {"n_positive", "N positive words"},
      {"n_negative", "N negative words"},
  };
  const auto src = sources.find(column.source);
  if (src != sources.end()) {
    if (column.role == ColumnRole::within) return src->second + " within";
    if (column.role == ColumnRole::between) return src->second + " between";
    return src->second;
  }
  if (column.source == "topic") return "Topic " + column.name.substr(6);
  if (column.source == "hour_of_day") return "Hour " + column.name.substr(12);
  if (column.source == "day_of_week")
    return "Weekday " + column.name.substr(12);
  return column.name;
}

std::vector<IrrRow> irr_table(const FittedGlmm& fit,
                              const std::vector<ColumnInfo>& columns) {
  if (static_cast<Eigen::Index>(columns.size()) != fit.beta.size())
    throw Error("irr_table: column metadata does not match fit");
  std::vector<IrrRow> rows;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].role == ColumnRole::intercept) continue;
    IrrRow row;
    row.name = display_name(columns[j]);
    const double b = fit.beta(static_cast<Eigen::Index>(j));
    const double se = fit.se_beta(static_cast<Eigen::Index>(j));
    row.irr = std::exp(b);
    row.se = se;
    row.p = se > 0.0 ? two_sided_p(b / se) : 1.0;
    row.stars = significance_stars(row.p);
    row.reliable = fit.ses_reliable;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ModelReport> compare_models(const std::vector<ModelResult>& fits,
                                        std::size_t baseline,
                                        Level1Method method) {
  if (fits.empty()) throw Error("compare_models: no fits");
  if (baseline >= fits.size()) throw Error("compare_models: bad baseline");
  for (const auto& f : fits)
    if (!f.fit || !f.design) throw Error("compare_models: null fit");

  const DesignMatrix* base = fits[baseline].design;
  for (const auto& f : fits) {
    if (f.design->n_rows() != base->n_rows() ||
        f.design->n_groups != base->n_groups ||
        f.design->y != base->y || f.design->group != base->group)
      throw Error("compare_models: fits were run on different datasets");
  }

  std::vector<ModelReport> reports;
  const double base_aic =
      aic(fits[baseline].fit->loglik, fits[baseline].fit->n_params);
  for (const auto& f : fits) {
    ModelReport r;
    r.label = f.label;
    r.loglik = f.fit->loglik;
    r.n_params = f.fit->n_params;
    r.aic = aic(f.fit->loglik, f.fit->n_params);
    r.delta_aic = r.aic - base_aic;
    r.level1_var = level1_variance(*f.fit, *f.design, method);
    r.level2_var = f.fit->sigma_u2;
    r.adjusted_icc = adjusted_icc(r.level2_var, r.level1_var);
    r.conditional_r2 = conditional_r2(*f.fit, *f.design, method);
    reports.push_back(std::move(r));
  }
  return reports;
}

namespace {

std::string num(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void render_table(std::ostream& out,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i];
      if (i + 1 < row.size())
        out << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    out << '\n';
  }
}

}  // namespace

std::string render_comparison_text(const std::vector<ModelReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"", "Model", "AIC (diff with baseline)", "Level 1 var",
                  "Level 2 var", "Adjusted ICC", "Conditional R2"});
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::string aic_cell = num(r.aic, "%.0f");
    if (r.delta_aic != 0.0)
      aic_cell += " (" + num(r.delta_aic, "%.0f") + ")";
    rows.push_back({std::to_string(i + 1), r.label, aic_cell,
                    num(r.level1_var, "%.2f"), num(r.level2_var, "%.2f"),
                    num(r.adjusted_icc, "%.2f"),
                    num(r.conditional_r2, "%.2f")});
  }
  std::ostringstream out;
  render_table(out, rows);
  return out.str();
}

void write_comparison_csv(std::ostream& out,
                          const std::vector<ModelReport>& reports) {
  out << "model,aic,delta_aic,level1_var,level2_var,adjusted_icc,"
         "conditional_r2,loglik,n_params\n";
  for (const auto& r : reports) {
    out << r.label << ',' << num(r.aic, "%.17g") << ','
        << num(r.delta_aic, "%.17g") << ',' << num(r.level1_var, "%.17g")
        << ',' << num(r.level2_var, "%.17g") << ','
        << num(r.adjusted_icc, "%.17g") << ','
        << num(r.conditional_r2, "%.17g") << ',' << num(r.loglik, "%.17g")
        << ',' << r.n_params << '\n';
  }
}

void write_comparison_json(std::ostream& out,
                           const std::vector<ModelReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"label", r.label},
                   {"aic", r.aic},
                   {"delta_aic", r.delta_aic},
                   {"level1_var", r.level1_var},
                   {"level2_var", r.level2_var},
                   {"adjusted_icc", r.adjusted_icc},
                   {"conditional_r2", r.conditional_r2},
                   {"loglik", r.loglik},
                   {"n_params", r.n_params}});
  }
  out << arr.dump(2) << '\n';
}

std::vector<std::string> format_irr_cells(const IrrRow& row) {
  std::string irr_cell = num(row.irr, "%.2f");
  if (!row.stars.empty()) irr_cell += " " + row.stars;
  return {row.name, irr_cell, num(row.se, "%.2f")};
}

std::string render_irr_text(const std::vector<IrrRow>& rows,
                            const ModelReport* footer) {
  std::vector<std::vector<std::string>> table;
  table.push_back({"Variable", "IRR", "SE"});
  for (const auto& r : rows) table.push_back(format_irr_cells(r));
  std::ostringstream out;
  render_table(out, table);
  if (footer) {
    out << "-2 Loglikelihood  " << num(-2.0 * footer->loglik, "%.0f") << '\n';
    out << "Adjusted ICC      " << num(footer->adjusted_icc, "%.2f") << '\n';
    out << "Conditional r2    " << num(footer->conditional_r2, "%.2f") << '\n';
  }
  out << "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05\n";
  return out.str();
}

void write_irr_csv(std::ostream& out, const std::vector<IrrRow>& rows) {
  out << "variable,irr,se,p,stars,reliable\n";
  for (const auto& r : rows) {
    out << '"' << r.name << "\"," << num(r.irr, "%.17g") << ','
        << num(r.se, "%.17g") << ',' << num(r.p, "%.17g") << ',' << r.stars
        << ',' << (r.reliable ? "true" : "false") << '\n';
  }
}

void write_irr_json(std::ostream& out, const std::vector<IrrRow>& rows,
                    const ModelReport* footer) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"variable", r.name},
                   {"irr", r.irr},
                   {"se", r.se},
                   {"p", r.p},
                   {"stars", r.stars},
                   {"reliable", r.reliable}});
  }
  nlohmann::json obj{{"rows", arr}};
  if (footer) {
    obj["minus2_loglik"] = -2.0 * footer->loglik;
    obj["adjusted_icc"] = footer->adjusted_icc;
    obj["conditional_r2"] = footer->conditional_r2;
  }
  out << obj.dump(2) << '\n';
}

}  // namespace emm
