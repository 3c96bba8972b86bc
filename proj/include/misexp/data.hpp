#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace misexp {

using Index = Eigen::Index;

/// Observed data (X, A, Y, R). `x` carries the intercept in column 0 followed
/// by p covariates. Missing exposures are stored as 0 in `a` with r = 1, so
/// every expression of the form (1 - r) * f(a) is well defined.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd a;
  Eigen::VectorXd y;
  Eigen::VectorXd r;
  std::vector<std::string> covariate_names;

  Index n() const noexcept { return x.rows(); }
  Index p() const noexcept { return x.cols() - 1; }

  /// Throws ValueError when an invariant is violated.
  void validate() const;

  /// Builds a dataset from raw covariates (no intercept) and an optional
  /// exposure per row.
  static Dataset from_columns(const Eigen::MatrixXd& covariates, const std::vector<std::optional<int>>& exposure,
                              const Eigen::VectorXd& outcome, std::vector<std::string> names = {});
};

struct DatasetSummary {
  Index n = 0;
  Index n_missing = 0;
  double missing_rate = 0.0;
  Index complete_exposed = 0;
  Index complete_unexposed = 0;
  double outcome_rate = 0.0;
};

DatasetSummary summarize(const Dataset& data);

/// Row subset (with repetition) in the given order.
Dataset take_rows(const Dataset& data, std::span<const Index> rows);

/// Permutation that sorts rows lexicographically by (x, y, r, a). Row-order
/// independent procedures (imputation draws) iterate in this order.
std::vector<Index> canonical_order(const Dataset& data);

}  // namespace misexp
