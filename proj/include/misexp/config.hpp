#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "misexp/csv.hpp"
#include "misexp/estimators.hpp"

namespace misexp {

enum class Mode { Simulate, Estimate, Bench };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

/// Covariates of one nuisance model as written in a config: "all", "none"
/// (imputation only), or a comma list of covariate names or 1-based indices.
struct ModelSelection {
  std::string covariates = "all";
  /// Y in the missingness / imputation model.
  bool extra_term = true;
};

struct RunConfig {
  Mode mode = Mode::Estimate;
  std::optional<std::string> dataset_path;
  ColumnMap columns;

  ModelSelection missingness;
  ModelSelection imputation;
  ModelSelection ps;
  ModelSelection outcome;
  bool bayes_fallback = false;

  /// Empty: every method (estimate) or the grid's own methods (bench).
  std::vector<Method> methods;
  int B = 500;
  int N = 200;
  Index n = 1000;
  int m = 10;
  std::uint64_t seed = 20240601;
  int threads = 1;

  /// bench: "ipw" or "tr". simulate: "benchmark" or "covid".
  std::string grid = "ipw";
  /// bench only: scenario labels to keep (empty: the whole grid).
  std::vector<std::string> scenarios;
  std::string dgp = "benchmark";

  std::optional<std::string> output_path;
  /// bench only: per-replication estimates as CSV.
  std::optional<std::string> replicates_path;

  /// Throws ConfigError. Estimate mode needs a dataset path; simulate and
  /// bench forbid one.
  void validate() const;
};

/// Resolves the four model selections against the covariate names of `data`.
/// Throws ConfigError for unknown names, bad indices or when a requested
/// method needs an imputation model and the selection is "none".
SpecBundle resolve_specs(const RunConfig& cfg, const Dataset& data);

}  // namespace misexp
