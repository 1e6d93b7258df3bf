#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emm/types.hpp"

namespace emm {

// within_i = x_i - mean over i's group; between_i = group mean - grand mean
// of the group means. within + between + grand mean reconstructs x exactly.
void group_mean_center(std::span<const double> x, std::span<const int> group,
                       std::span<double> within, std::span<double> between,
                       double* grand_mean = nullptr);

struct Standardized {
  Eigen::VectorXd z;
  double mean = 0.0;
  double sd = 0.0;  // population SD
};

Standardized standardize(const Eigen::VectorXd& x);

enum class ColumnRole { intercept, dummy, within, between, level2, raw };

std::string_view to_string(ColumnRole role);

struct ColumnInfo {
  std::string name;       // e.g. "toxicity_within", "kind_quote"
  std::string source;     // the model-spec variable it came from
  ColumnRole role = ColumnRole::raw;
  double center = 0.0;    // constants making the transform invertible
  double scale = 1.0;
};

struct CenteringInfo {
  std::vector<double> group_means;  // indexed by dense group id
  double grand_mean = 0.0;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;            // nonnegative integer counts
  std::vector<int> group;       // dense ids in [0, n_groups)
  int n_groups = 0;
  std::vector<ColumnInfo> columns;
  std::vector<std::string> group_labels;
  std::map<std::string, CenteringInfo> centerings;  // per centered variable
  std::vector<std::string> warnings;

  Eigen::Index n_rows() const { return X.rows(); }
  Eigen::Index n_cols() const { return X.cols(); }
  int intercept_column() const;  // -1 when absent
};

// Column-oriented staging table encode() consumes; rows from the pipeline and
// synthetic datasets both flatten to this.
struct Table {
  std::size_t n_rows = 0;
  std::map<std::string, std::vector<double>> numeric;
  std::map<std::string, std::vector<std::string>> categorical;

  bool has(const std::string& name) const {
    return numeric.count(name) || categorical.count(name);
  }
};

Table rows_to_table(const std::vector<AnalysisRow>& rows);

void write_table_csv(std::ostream& out, const Table& table);
Table read_table_csv(std::istream& in);

enum class Transform { automatic, within_between, level2, dummy, binary, raw };

struct VariableSpec {
  std::string name;
  Transform transform = Transform::automatic;
  bool log10 = false;        // applied before standardization (level2 only)
  std::string reference;     // dummy reference level override
};

struct ModelSpec {
  std::string label = "model";
  std::string response = "engagement";
  std::string group = "influencer_id";
  std::vector<VariableSpec> variables;
};

struct EncodeOptions {
  // Grand-mean centering of the between component keeps the intercept at the
  // average influencer; off leaves raw group means.
  bool center_between = true;
};

// Variable registry resolving Transform::automatic; see encode() notes.
Transform default_transform(const std::string& name);

DesignMatrix encode(const Table& table, const ModelSpec& spec,
                    const EncodeOptions& options = {});

// X/y/group CSV plus a JSON sidecar with column metadata and centering/scale
// constants.
void write_design_csv(std::ostream& out, const DesignMatrix& design);
void write_design_sidecar_json(std::ostream& out, const DesignMatrix& design);

}  // namespace emm
