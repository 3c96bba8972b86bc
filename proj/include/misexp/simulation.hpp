#pragma once

// Simulation harness: the three-covariate data-generating process, the true
// odds ratio by Gauss-Hermite quadrature, the IPW (8) and TR (16) model
// specification grids, and the replication metrics.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/estimators.hpp"

namespace misexp {

struct DgpConfig {
  Index n = 1000;
  Eigen::VectorXd coef_ps;       // [a0, a1, a2, a3]
  Eigen::VectorXd coef_outcome;  // [b0, b1, b2, b3, bA]
  Eigen::VectorXd coef_missing;  // [g0, g1, g2, g3, gY]
  std::uint64_t seed = 0;

  /// The benchmark configuration (about 47.5% missing, tau = 2.201).
  static DgpConfig benchmark(Index n = 1000, std::uint64_t seed = 0);
  void validate() const;
};

/// A simulated dataset plus the exposures hidden by the missingness draw.
struct SimulatedDraw {
  Dataset data;
  Eigen::VectorXd full_exposure;
};

SimulatedDraw generate_draw(const DgpConfig& cfg);
Dataset generate_dataset(const DgpConfig& cfg);

/// Probabilists' Gauss-Hermite rule: nodes and weights with
/// sum_k w_k f(z_k) ~ E[f(Z)], Z ~ N(0, 1).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
QuadratureRule gauss_hermite(int order);

/// (P(Y^1 = 1), P(Y^0 = 1)) for standard normal covariates. The covariates
/// enter only through b'X ~ N(0, |b|^2), so the expectation is one-dimensional.
std::pair<double, double> true_arm_means(const Eigen::VectorXd& coef_outcome, int order = 60);
double true_tau(const Eigen::VectorXd& coef_outcome, int order = 60);

/// A row of the specification tables: which model groups are correct.
struct Scenario {
  std::string label;
  bool ms_ok = true;
  bool imp_ok = true;
  bool ps_ok = true;
  bool or_ok = true;
  SpecBundle specs;
};

/// Wrong PS / outcome models drop X3; wrong missingness / imputation models
/// drop Y. The Bayes fallback is switched on when both missingness and
/// imputation are wrong.
Scenario make_scenario(bool ms_ok, bool imp_ok, bool ps_ok, bool or_ok);

/// Table order of the IPW grid (imputation spec unused, left correct).
std::vector<Scenario> ipw_scenarios();
/// Table order of the TR grid.
std::vector<Scenario> tr_scenarios();

struct ScenarioGrid {
  std::vector<Scenario> scenarios;
  std::vector<Method> methods;
  int reps = 200;
  /// Bootstrap size per replication; 0 skips the bootstrap, leaving
  /// median_bse and ci_coverage as NaN.
  int bootstrap_B = 500;
  std::uint64_t seed = 20240601;
  int threads = 1;
  /// Flag cells with more than 20% failed replications instead of throwing.
  bool tolerate_failed_cells = false;
  EstimatorOptions estimator;

  static ScenarioGrid ipw();
  static ScenarioGrid tr();
  void validate() const;
};

struct Replication {
  bool ok = false;
  double tau = 0.0;
  double bse = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool has_ci = false;
};

struct CellMetrics {
  std::string scenario;
  Method method = Method::IpwIpw;
  int reps = 0;
  double bias = 0.0;
  double bias_rate = 0.0;  // percent of the true tau
  double ese = 0.0;
  double median_bse = 0.0;
  double rmse = 0.0;
  double ci_coverage = 0.0;  // percent
  int n_failed_reps = 0;
  bool flagged = false;
  std::vector<Replication> replications;
};

/// Bias, bias rate, ESE (N - 1 divisor), median BSE, RMSE (N - 1 divisor) and
/// percentile-CI coverage over the successful replications.
CellMetrics compute_metrics(std::string scenario, Method method, std::vector<Replication> replications,
                            double true_tau);

struct MetricsReport {
  double true_tau = 0.0;
  int reps = 0;
  int bootstrap_B = 0;
  std::vector<CellMetrics> cells;

  const CellMetrics& cell(const std::string& scenario, Method method) const;
};

/// Replication r draws its dataset from derive_seed(seed, {0, r}), shared by
/// every scenario and method, the bootstrap resamples from
/// derive_seed(seed, {1, r}) and stochastic estimators from
/// derive_seed(seed, {2, r}).
MetricsReport run_scenario_grid(const DgpConfig& cfg, const ScenarioGrid& grid);

}  // namespace misexp
