#include "emm/design.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>
#include <set>
#include <unordered_map>

#include "emm/csv.hpp"
#include "emm/error.hpp"
#include "emm/io.hpp"
#include "emm/timeutil.hpp"

namespace emm {

using nlohmann::json;

void group_mean_center(std::span<const double> x, std::span<const int> group,
                       std::span<double> within, std::span<double> between,
                       double* grand_mean_out) {
  const std::size_t n = x.size();
  if (group.size() != n || within.size() != n || between.size() != n)
    throw Error("group_mean_center: length mismatch");
  if (n == 0) throw Error("group_mean_center: empty input");

  int n_groups = 0;
  for (int g : group) n_groups = std::max(n_groups, g + 1);
  std::vector<double> sum(static_cast<std::size_t>(n_groups), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_groups), 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[static_cast<std::size_t>(group[i])] += x[i];
    ++count[static_cast<std::size_t>(group[i])];
  }
  double grand = 0.0;
  std::size_t used = 0;
  for (std::size_t g = 0; g < sum.size(); ++g) {
    if (count[g] == 0) continue;
    sum[g] /= static_cast<double>(count[g]);
    grand += sum[g];
    ++used;
  }
  grand /= static_cast<double>(used);
  for (std::size_t i = 0; i < n; ++i) {
    const double gm = sum[static_cast<std::size_t>(group[i])];
    within[i] = x[i] - gm;
    between[i] = gm - grand;
  }
  if (grand_mean_out) *grand_mean_out = grand;
}

Standardized standardize(const Eigen::VectorXd& x) {
  if (x.size() == 0) throw Error("standardize: empty input");
  Standardized s;
  s.mean = x.mean();
  const double var = (x.array() - s.mean).square().mean();
  s.sd = std::sqrt(var);
  if (s.sd == 0.0) throw Error("standardize: constant column");
  s.z = (x.array() - s.mean) / s.sd;
  return s;
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::intercept: return "intercept";
    case ColumnRole::dummy: return "dummy";
    case ColumnRole::within: return "within";
    case ColumnRole::between: return "between";
    case ColumnRole::level2: return "level2";
    case ColumnRole::raw: return "raw";
  }
  return "raw";
}

int DesignMatrix::intercept_column() const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].role == ColumnRole::intercept) return static_cast<int>(i);
  return -1;
}

Table rows_to_table(const std::vector<AnalysisRow>& rows) {
  Table t;
  t.n_rows = rows.size();
  auto& num = t.numeric;
  auto& cat = t.categorical;
  const auto reserve = [&](auto& m, const char* name) -> auto& {
    auto& v = m[name];
    v.reserve(rows.size());
    return v;
  };
  auto& engagement = reserve(num, "engagement");
  auto& has_url = reserve(num, "has_url");
  auto& has_image = reserve(num, "has_image");
  auto& has_video = reserve(num, "has_video");
  auto& has_gif = reserve(num, "has_gif");
  auto& requests_retweet = reserve(num, "requests_retweet");
  auto& n_chars = reserve(num, "n_chars");
  auto& n_exclaim = reserve(num, "n_exclaim");
  auto& n_question = reserve(num, "n_question");
  auto& n_hashtags = reserve(num, "n_hashtags");
  auto& n_positive = reserve(num, "n_positive");
  auto& n_negative = reserve(num, "n_negative");
  auto& toxicity = reserve(num, "toxicity");
  auto& n_followers = reserve(num, "n_followers");
  auto& statuses = reserve(num, "followers_mean_statuses");
  auto& verified = reserve(num, "pct_verified_followers");
  auto& entry_id = reserve(cat, "entry_id");
  auto& influencer = reserve(cat, "influencer_id");
  auto& kind = reserve(cat, "kind");
  auto& hour = reserve(cat, "hour_of_day");
  auto& weekday = reserve(cat, "day_of_week");
  auto& topic = reserve(cat, "topic");
  auto& created = reserve(cat, "created_at");

  for (const auto& r : rows) {
    engagement.push_back(static_cast<double>(r.engagement_count));
    has_url.push_back(r.features.has_url ? 1.0 : 0.0);
    has_image.push_back(r.features.has_image ? 1.0 : 0.0);
    has_video.push_back(r.features.has_video ? 1.0 : 0.0);
    has_gif.push_back(r.features.has_gif ? 1.0 : 0.0);
    requests_retweet.push_back(r.features.requests_retweet ? 1.0 : 0.0);
    n_chars.push_back(r.features.n_chars);
    n_exclaim.push_back(r.features.n_exclaim);
    n_question.push_back(r.features.n_question);
    n_hashtags.push_back(r.features.n_hashtags);
    n_positive.push_back(r.features.n_positive);
    n_negative.push_back(r.features.n_negative);
    toxicity.push_back(r.features.toxicity);
    n_followers.push_back(r.n_followers_prev_day);
    statuses.push_back(r.followers_mean_statuses);
    verified.push_back(r.pct_verified_followers);
    entry_id.push_back(r.entry_id);
    influencer.push_back(r.influencer_id);
    kind.push_back(std::string(to_string(r.kind())));
    hour.push_back(std::to_string(r.features.hour_of_day));
    weekday.push_back(std::to_string(r.features.day_of_week));
    topic.push_back(r.dominant_topic);
    created.push_back(format_iso8601(r.created_at));
  }
  return t;
}

void write_table_csv(std::ostream& out, const Table& table) {
  std::vector<std::string> header;
  for (const auto& [name, _] : table.numeric) header.push_back("n:" + name);
  for (const auto& [name, _] : table.categorical) header.push_back("c:" + name);
  write_csv_row(out, header);
  std::vector<std::string> row;
  for (std::size_t i = 0; i < table.n_rows; ++i) {
    row.clear();
    for (const auto& [_, col] : table.numeric) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", col[i]);
      row.emplace_back(buf);
    }
    for (const auto& [_, col] : table.categorical) row.push_back(col[i]);
    write_csv_row(out, row);
  }
}

Table read_table_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> header;
  Table t;
  if (!reader.next(header)) return t;
  struct Col {
    bool numeric;
    std::string name;
  };
  std::vector<Col> cols;
  for (const auto& h : header) {
    if (h.starts_with("n:"))
      cols.push_back({true, h.substr(2)});
    else if (h.starts_with("c:"))
      cols.push_back({false, h.substr(2)});
    else
      throw Error("table CSV header needs n:/c: prefixes, got: " + h);
  }
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != cols.size()) throw Error("table CSV: ragged row");
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i].numeric)
        t.numeric[cols[i].name].push_back(std::stod(row[i]));
      else
        t.categorical[cols[i].name].push_back(row[i]);
    }
    ++t.n_rows;
  }
  return t;
}

Transform default_transform(const std::string& name) {
  static const std::set<std::string> entry_numeric{
      "toxicity", "n_chars", "n_exclaim", "n_question",
      "n_hashtags", "n_positive", "n_negative"};
  static const std::set<std::string> booleans{
      "has_url", "has_image", "has_video", "has_gif", "requests_retweet"};
  static const std::set<std::string> level2{
      "n_followers", "followers_mean_statuses", "pct_verified_followers"};
  static const std::set<std::string> categoricals{
      "kind", "topic", "hour_of_day", "day_of_week"};
  if (entry_numeric.count(name)) return Transform::within_between;
  if (booleans.count(name)) return Transform::binary;
  if (level2.count(name)) return Transform::level2;
  if (categoricals.count(name)) return Transform::dummy;
  return Transform::raw;
}

namespace {

const std::vector<double>& numeric_column(const Table& table,
                                          const std::string& name) {
  const auto it = table.numeric.find(name);
  if (it == table.numeric.end())
    throw Error("unknown numeric variable: " + name);
  return it->second;
}

const std::vector<std::string>& categorical_column(const Table& table,
                                                   const std::string& name) {
  const auto it = table.categorical.find(name);
  if (it == table.categorical.end())
    throw Error("unknown categorical variable: " + name);
  return it->second;
}

std::string pick_reference(const std::string& name,
                           const std::vector<std::string>& values,
                           const std::string& override_ref) {
  if (!override_ref.empty()) return override_ref;
  if (name == "kind") return "post";
  if (name == "hour_of_day" || name == "day_of_week") return "0";
  // Most frequent level, ties broken lexicographically.
  std::map<std::string, std::size_t> freq;
  for (const auto& v : values) ++freq[v];
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [level, n] : freq) {
    if (n > best_n) {
      best = level;
      best_n = n;
    }
  }
  return best;
}

bool constant_column(const Eigen::VectorXd& col) {
  return (col.array() == col(0)).all();
}

}  // namespace

DesignMatrix encode(const Table& table, const ModelSpec& spec,
                    const EncodeOptions& options) {
  const std::size_t n = table.n_rows;
  if (n == 0) throw Error("encode: empty table");

  DesignMatrix design;

  // Response.
  const auto& yv = numeric_column(table, spec.response);
  design.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (yv[i] < 0 || std::floor(yv[i]) != yv[i])
      throw Error("response must be a nonnegative integer count");
    design.y(static_cast<Eigen::Index>(i)) = yv[i];
  }

  // Dense group ids in order of first appearance.
  const auto& gv = categorical_column(table, spec.group);
  design.group.resize(n);
  std::unordered_map<std::string, int> group_index;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [it, inserted] = group_index.emplace(
        gv[i], static_cast<int>(design.group_labels.size()));
    if (inserted) design.group_labels.push_back(gv[i]);
    design.group[i] = it->second;
  }
  design.n_groups = static_cast<int>(design.group_labels.size());

  std::vector<Eigen::VectorXd> cols;
  std::vector<ColumnInfo> infos;
  const auto push = [&](Eigen::VectorXd col, ColumnInfo info) {
    if (info.role != ColumnRole::intercept && constant_column(col)) {
      design.warnings.push_back("dropped zero-variance column: " + info.name);
      return;
    }
    cols.push_back(std::move(col));
    infos.push_back(std::move(info));
  };

  push(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)),
       {"(intercept)", "(intercept)", ColumnRole::intercept, 0.0, 1.0});

  for (const auto& var : spec.variables) {
    Transform tf = var.transform == Transform::automatic
                       ? default_transform(var.name)
                       : var.transform;
    switch (tf) {
      case Transform::within_between: {
        const auto& x = numeric_column(table, var.name);
        std::vector<double> within(n), between(n);
        double grand = 0.0;
        group_mean_center(x, design.group, within, between, &grand);
        CenteringInfo ci;
        ci.grand_mean = grand;
        ci.group_means.assign(static_cast<std::size_t>(design.n_groups), 0.0);
        for (std::size_t i = 0; i < n; ++i)
          ci.group_means[static_cast<std::size_t>(design.group[i])] =
              between[i] + grand;
        design.centerings[var.name] = std::move(ci);

        Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(within.data(),
                                                        static_cast<Eigen::Index>(n));
        Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(between.data(),
                                                        static_cast<Eigen::Index>(n));
        if (!options.center_between)
          b.array() += grand;
        const Standardized sw = standardize(w);
        const Standardized sb = standardize(b);
        push(sw.z, {var.name + "_within", var.name, ColumnRole::within,
                    sw.mean, sw.sd});
        push(sb.z, {var.name + "_between", var.name, ColumnRole::between,
                    sb.mean, sb.sd});
        break;
      }
      case Transform::level2: {
        const auto& x = numeric_column(table, var.name);
        Eigen::VectorXd col(static_cast<Eigen::Index>(n));
        const bool log_scale = var.log10 || var.name == "n_followers";
        for (std::size_t i = 0; i < n; ++i) {
          double v = x[i];
          if (std::isnan(v))
            throw Error("missing value in level-2 variable " + var.name);
          if (log_scale) v = std::log10(std::max(v, 1.0));
          col(static_cast<Eigen::Index>(i)) = v;
        }
        const Standardized s = standardize(col);
        push(s.z, {var.name, var.name, ColumnRole::level2, s.mean, s.sd});
        break;
      }
      case Transform::binary: {
        const auto& x = numeric_column(table, var.name);
        Eigen::VectorXd col(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] != 0.0 && x[i] != 1.0)
            throw Error("binary variable " + var.name + " must be 0/1");
          col(static_cast<Eigen::Index>(i)) = x[i];
        }
        push(col, {var.name, var.name, ColumnRole::dummy, 0.0, 1.0});
        break;
      }
      case Transform::dummy: {
        const auto& x = categorical_column(table, var.name);
        const std::string ref = pick_reference(var.name, x, var.reference);
        std::set<std::string> levels(x.begin(), x.end());
        if (!var.reference.empty() && !levels.count(var.reference))
          throw Error("reference level '" + var.reference +
                      "' not present in " + var.name);
        levels.erase(ref);
        std::vector<std::string> ordered(levels.begin(), levels.end());
        if (var.name == "hour_of_day" || var.name == "day_of_week") {
          std::sort(ordered.begin(), ordered.end(),
                    [](const std::string& a, const std::string& b) {
                      return std::stoi(a) < std::stoi(b);
                    });
        } else if (var.name == "kind") {
          // Canonical quote-then-reply order, matching the report tables.
          std::vector<std::string> canon;
          for (const char* l : {"quote", "reply", "post", "retweet"})
            if (levels.count(l)) canon.push_back(l);
          ordered = canon;
        }
        if (ordered.empty()) {
          design.warnings.push_back("dropped all-reference categorical: " +
                                    var.name);
          break;
        }
        for (const auto& level : ordered) {
          Eigen::VectorXd col(static_cast<Eigen::Index>(n));
          for (std::size_t i = 0; i < n; ++i)
            col(static_cast<Eigen::Index>(i)) = x[i] == level ? 1.0 : 0.0;
          push(col, {var.name + "_" + level, var.name, ColumnRole::dummy,
                     0.0, 1.0});
        }
        break;
      }
      case Transform::raw: {
        const auto& x = numeric_column(table, var.name);
        Eigen::VectorXd col = Eigen::Map<const Eigen::VectorXd>(
            x.data(), static_cast<Eigen::Index>(n));
        push(col, {var.name, var.name, ColumnRole::raw, 0.0, 1.0});
        break;
      }
      case Transform::automatic:
        throw Error("unreachable transform state");
    }
  }

  design.X.resize(static_cast<Eigen::Index>(n),
                  static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    design.X.col(static_cast<Eigen::Index>(c)) = cols[c];
  design.columns = std::move(infos);
  return design;
}

void write_design_csv(std::ostream& out, const DesignMatrix& design) {
  std::vector<std::string> header{"y", "group"};
  for (const auto& c : design.columns) header.push_back(c.name);
  write_csv_row(out, header);
  std::vector<std::string> row;
  char buf[40];
  for (Eigen::Index i = 0; i < design.n_rows(); ++i) {
    row.clear();
    std::snprintf(buf, sizeof(buf), "%.17g", design.y(i));
    row.emplace_back(buf);
    row.push_back(design.group_labels[static_cast<std::size_t>(
        design.group[static_cast<std::size_t>(i)])]);
    for (Eigen::Index j = 0; j < design.n_cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", design.X(i, j));
      row.emplace_back(buf);
    }
    write_csv_row(out, row);
  }
}

void write_design_sidecar_json(std::ostream& out, const DesignMatrix& design) {
  json cols = json::array();
  for (const auto& c : design.columns) {
    cols.push_back({{"name", c.name},
                    {"source", c.source},
                    {"role", std::string(to_string(c.role))},
                    {"center", c.center},
                    {"scale", c.scale}});
  }
  json centerings = json::object();
  for (const auto& [name, ci] : design.centerings) {
    centerings[name] = {{"group_means", ci.group_means},
                        {"grand_mean", ci.grand_mean}};
  }
  const json obj{{"columns", cols},
                 {"group_labels", design.group_labels},
                 {"centerings", centerings},
                 {"warnings", design.warnings}};
  out << obj.dump(2) << '\n';
}

}  // namespace emm
