#include "misexp/data.hpp"

#include <algorithm>
#include <numeric>

#include "misexp/errors.hpp"

namespace misexp {

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

void Dataset::validate() const {
  const Index rows = x.rows();
  if (rows < 1) throw ValueError("dataset has no rows");
  if (x.cols() < 1) throw ValueError("design matrix has no intercept column");
  if (a.size() != rows || y.size() != rows || r.size() != rows) {
    throw ValueError("dataset columns have inconsistent lengths");
  }
  if (!x.allFinite()) throw ValueError("design matrix has non-finite entries");
  if (!(x.col(0).array() == 1.0).all()) throw ValueError("first design column must be identically 1");
  if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != p()) {
    throw ValueError("covariate name count does not match the design");
  }
  for (Index i = 0; i < rows; ++i) {
    if (!is_binary(y(i))) throw ValueError("outcome must be 0/1 (row " + std::to_string(i) + ")");
    if (!is_binary(r(i))) throw ValueError("missing indicator must be 0/1 (row " + std::to_string(i) + ")");
    if (!is_binary(a(i))) throw ValueError("exposure must be 0/1 (row " + std::to_string(i) + ")");
    if (r(i) == 1.0 && a(i) != 0.0) {
      throw ValueError("missing exposure must be stored as 0 (row " + std::to_string(i) + ")");
    }
  }
}

Dataset Dataset::from_columns(const Eigen::MatrixXd& covariates, const std::vector<std::optional<int>>& exposure,
                              const Eigen::VectorXd& outcome, std::vector<std::string> names) {
  const Index rows = covariates.rows();
  if (static_cast<Index>(exposure.size()) != rows || outcome.size() != rows) {
    throw ValueError("dataset columns have inconsistent lengths");
  }
  Dataset d;
  d.x.resize(rows, covariates.cols() + 1);
  d.x.col(0).setOnes();
  d.x.rightCols(covariates.cols()) = covariates;
  d.a.resize(rows);
  d.r.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    const auto& ai = exposure[static_cast<std::size_t>(i)];
    d.r(i) = ai ? 0.0 : 1.0;
    d.a(i) = ai ? static_cast<double>(*ai) : 0.0;
  }
  d.y = outcome;
  d.covariate_names = std::move(names);
  d.validate();
  return d;
}

DatasetSummary summarize(const Dataset& data) {
  DatasetSummary s;
  s.n = data.n();
  for (Index i = 0; i < data.n(); ++i) {
    if (data.r(i) == 1.0) {
      ++s.n_missing;
    } else if (data.a(i) == 1.0) {
      ++s.complete_exposed;
    } else {
      ++s.complete_unexposed;
    }
  }
  s.missing_rate = s.n > 0 ? static_cast<double>(s.n_missing) / static_cast<double>(s.n) : 0.0;
  s.outcome_rate = s.n > 0 ? data.y.mean() : 0.0;
  return s;
}

Dataset take_rows(const Dataset& data, std::span<const Index> rows) {
  const auto m = static_cast<Index>(rows.size());
  Dataset out;
  out.x.resize(m, data.x.cols());
  out.a.resize(m);
  out.y.resize(m);
  out.r.resize(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    out.x.row(k) = data.x.row(i);
    out.a(k) = data.a(i);
    out.y(k) = data.y(i);
    out.r(k) = data.r(i);
  }
  out.covariate_names = data.covariate_names;
  return out;
}

std::vector<Index> canonical_order(const Dataset& data) {
  std::vector<Index> order(static_cast<std::size_t>(data.n()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto less = [&](Index i, Index j) {
    for (Index c = 1; c < data.x.cols(); ++c) {
      if (data.x(i, c) != data.x(j, c)) return data.x(i, c) < data.x(j, c);
    }
    if (data.y(i) != data.y(j)) return data.y(i) < data.y(j);
    if (data.r(i) != data.r(j)) return data.r(i) < data.r(j);
    return data.a(i) < data.a(j);
  };
  std::stable_sort(order.begin(), order.end(), less);
  return order;
}

}  // namespace misexp
