#pragma once

// Nonparametric bootstrap with percentile intervals, and the delta-method
// variance of log(tau) built from the arm-mean covariance.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/estimators.hpp"

namespace misexp {

struct BootstrapResult {
  std::vector<double> replicates;  // usable tau replicates, in replicate order
  std::vector<double> tau1_replicates;
  std::vector<double> tau0_replicates;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double bse = 0.0;
  /// The per-dataset SE that a simulation takes the median of (equal to bse).
  double median_bse_input = 0.0;
  int n_failed = 0;

  /// Sample covariance of (tau1, tau0) over the usable replicates.
  Eigen::Matrix2d arm_covariance() const;
};

/// Estimator run on one resample; `seed` drives any internal randomness.
using ReplicateEstimator = std::function<EffectEstimate(const Dataset& resample, std::uint64_t seed)>;

struct BootstrapOptions {
  double level = 0.95;
  /// Worker threads for the replicate loop. Results do not depend on it.
  int threads = 1;
};

/// B resamples of n rows with replacement. Replicate b draws its rows from
/// derive_seed(seed, {b}) and passes derive_seed(seed, {b, 1}) to the
/// estimator. Replicates that throw a NumericalError or return a non-finite
/// tau are dropped and counted. Throws InsufficientReplicatesError when fewer
/// than B / 2 are usable and ConfigError when B < 100.
BootstrapResult bootstrap(const Dataset& data, const ReplicateEstimator& estimator, int B, std::uint64_t seed,
                          const BootstrapOptions& opts = {});

BootstrapResult bootstrap(const Dataset& data, const SpecBundle& specs, Method method, int B, std::uint64_t seed,
                          const EstimatorOptions& est_opts = {}, const BootstrapOptions& opts = {});

/// Row indices of bootstrap resample `b`.
std::vector<Index> resample_indices(Index n, std::uint64_t seed, int b);

/// Type-7 (linear interpolation) sample quantile; `sorted` must be ascending.
double quantile_type7(std::span<const double> sorted, double prob);

/// Standard deviation with the n - 1 divisor (0 for fewer than two values).
double sample_sd(std::span<const double> values);

enum class DeltaVariant {
  /// Cross term cov / (g1 g0) with coefficient +1.
  Printed,
  /// First-order expansion of logit(t1) - logit(t0): cross term -2 cov / (g1 g0).
  Textbook,
};

struct DeltaVariance {
  double var_log_tau = 0.0;
  double var_tau = 0.0;
  double var_tau1 = 0.0;
  double var_tau0 = 0.0;
  double cov_tau = 0.0;
};

/// Combines var(tau1), var(tau0), cov(tau1, tau0) into var(log tau) with
/// g_k = tau_k (1 - tau_k), and var(tau) = tau^2 var(log tau).
/// Throws DomainError when tau1 or tau0 is outside (0, 1) and ConfigError when
/// `cov` is asymmetric or has a negative diagonal.
DeltaVariance delta_variance(double tau1, double tau0, const Eigen::Matrix2d& cov,
                             DeltaVariant variant = DeltaVariant::Printed);

}  // namespace misexp
