#include "misexp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include "misexp/errors.hpp"
#include "misexp/random.hpp"

namespace misexp {

double quantile_type7(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("quantile probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

Eigen::Matrix2d BootstrapResult::arm_covariance() const {
  const auto k = static_cast<Index>(tau1_replicates.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  if (k < 2) return cov;
  Eigen::MatrixXd pts(k, 2);
  for (Index i = 0; i < k; ++i) {
    pts(i, 0) = tau1_replicates[static_cast<std::size_t>(i)];
    pts(i, 1) = tau0_replicates[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd centered = pts.rowwise() - pts.colwise().mean();
  cov = centered.transpose() * centered / static_cast<double>(k - 1);
  return cov;
}

std::vector<Index> resample_indices(Index n, std::uint64_t seed, int b) {
  CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  return rows;
}

BootstrapResult bootstrap(const Dataset& data, const ReplicateEstimator& estimator, int B, std::uint64_t seed,
                          const BootstrapOptions& opts) {
  if (B < 100) throw ConfigError("bootstrap needs B >= 100");
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw ConfigError("bootstrap level must be in (0, 1)");
  if (opts.threads < 1) throw ConfigError("bootstrap needs at least one thread");

  std::vector<std::optional<EffectEstimate>> slots(static_cast<std::size_t>(B));
  const auto run = [&](int b) {
    const std::vector<Index> rows = resample_indices(data.n(), seed, b);
    const Dataset resample = take_rows(data, rows);
    try {
      EffectEstimate est = estimator(resample, derive_seed(seed, {static_cast<std::uint64_t>(b), 1}));
      if (std::isfinite(est.tau)) slots[static_cast<std::size_t>(b)] = est;
    } catch (const NumericalError&) {
      // dropped and counted below
    }
  };

  const int workers = std::clamp(opts.threads, 1, B);
  if (workers == 1) {
    for (int b = 0; b < B; ++b) run(b);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int b = t; b < B; b += workers) run(b);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BootstrapResult res;
  for (const auto& s : slots) {
    if (!s) {
      ++res.n_failed;
      continue;
    }
    res.replicates.push_back(s->tau);
    res.tau1_replicates.push_back(s->tau1);
    res.tau0_replicates.push_back(s->tau0);
  }
  if (2 * res.replicates.size() < static_cast<std::size_t>(B)) {
    throw InsufficientReplicatesError("bootstrap: only " + std::to_string(res.replicates.size()) + " of " +
                                      std::to_string(B) + " replicates usable");
  }
  std::vector<double> sorted = res.replicates;
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - opts.level) / 2.0;
  res.ci_lower = quantile_type7(sorted, tail);
  res.ci_upper = quantile_type7(sorted, 1.0 - tail);
  res.bse = sample_sd(res.replicates);
  res.median_bse_input = res.bse;
  return res;
}

BootstrapResult bootstrap(const Dataset& data, const SpecBundle& specs, Method method, int B, std::uint64_t seed,
                          const EstimatorOptions& est_opts, const BootstrapOptions& opts) {
  specs.validate(data.p(), method);
  const ReplicateEstimator est = [&](const Dataset& resample, std::uint64_t rep_seed) {
    EstimatorOptions o = est_opts;
    o.seed = rep_seed;
    return estimate(method, resample, specs, o);
  };
  return bootstrap(data, est, B, seed, opts);
}

DeltaVariance delta_variance(double tau1, double tau0, const Eigen::Matrix2d& cov, DeltaVariant variant) {
  if (!(tau1 > 0.0 && tau1 < 1.0) || !(tau0 > 0.0 && tau0 < 1.0)) {
    throw DomainError("delta_variance: arm means must lie in (0, 1)");
  }
  if (cov(0, 1) != cov(1, 0)) throw ConfigError("delta_variance: covariance must be symmetric");
  if (cov(0, 0) < 0.0 || cov(1, 1) < 0.0) throw ConfigError("delta_variance: negative variance");

  const double g1 = tau1 * (1.0 - tau1);
  const double g0 = tau0 * (1.0 - tau0);
  const double cross = variant == DeltaVariant::Printed ? 1.0 : -2.0;

  DeltaVariance d;
  d.var_tau1 = cov(0, 0);
  d.var_tau0 = cov(1, 1);
  d.cov_tau = cov(0, 1);
  d.var_log_tau = d.var_tau1 / (g1 * g1) + d.var_tau0 / (g0 * g0) + cross * d.cov_tau / (g1 * g0);
  const double tau = odds_ratio(tau1, tau0);
  d.var_tau = tau * tau * d.var_log_tau;
  return d;
}

}  // namespace misexp
