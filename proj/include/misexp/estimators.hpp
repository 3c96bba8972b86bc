#pragma once

// Causal odds-ratio estimators for a binary exposure that is missing at
// random: IPW-IPW, IPW-DR, IPW-WEE, TR-AIPW, TR-WEE, DR-SI and DR-MICE.
//
// Each estimator produces tau1 = P(Y^1 = 1), tau0 = P(Y^0 = 1) and the odds
// ratio. The unexposed arm is always obtained from the exposed-arm formula by
// the substitution A -> 1 - A, P_A -> 1 - P_A, pi -> 1 - pi and the outcome
// prediction at A = 0 (see `Arm`).

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/models.hpp"
#include "misexp/random.hpp"

namespace misexp {

enum class Method { IpwIpw, IpwDr, IpwWee, TrAipw, TrWee, DrSi, DrMice };

std::string to_string(Method method);
/// Accepts the display tags ("TR-WEE") case-insensitively, with '-' or '_'.
Method parse_method(const std::string& tag);
const std::vector<Method>& all_methods();

bool uses_imputation(Method method);
bool is_stochastic(Method method);

struct SpecBundle {
  ModelSpec missingness = ModelSpec::missingness({});
  std::optional<ModelSpec> imputation;
  ModelSpec ps = ModelSpec::propensity({});
  ModelSpec outcome = ModelSpec::outcome({});
  bool use_bayes_fallback = false;

  /// Every model uses all p covariates; missingness/imputation include Y and
  /// the outcome model includes A.
  static SpecBundle all_correct(Index p);

  /// Throws ConfigError when a slot holds the wrong model kind or the method
  /// needs an imputation spec that is absent.
  void validate(Index p, Method method) const;
};

struct EstimatorOptions {
  SolveOptions solve;
  int mice_imputations = 10;
  std::uint64_t seed = 0;
  /// Fixed-point iteration between the Bayes reconstruction and the EE fits.
  int bayes_max_iterations = 200;
  double bayes_tolerance = 1e-8;
};

struct Diagnostics {
  bool clamped_probabilities = false;
  bool clamped_tau = false;
  bool extreme_weights = false;
  int solver_iterations = 0;
  int bayes_iterations = 0;
  double max_weight = 0.0;
  /// DR-MICE only: Rubin total variance of log(tau).
  std::optional<double> rubin_variance_log_tau;
};

struct EffectEstimate {
  double tau1 = 0.5;
  double tau0 = 0.5;
  double tau = 1.0;
  Method method = Method::IpwIpw;
  Diagnostics diagnostics;
};

/// [t1 / (1 - t1)] / [t0 / (1 - t0)].
double odds_ratio(double tau1, double tau0);

/// Clamps tau1, tau0 into [1e-6, 1 - 1e-6] (flagged) and composes the odds
/// ratio. Throws DegenerateArmError on non-finite input.
EffectEstimate make_estimate(Method method, double tau1, double tau0, Diagnostics diag);

/// One arm of the data after the exposure substitution.
struct Arm {
  Eigen::VectorXd indicator;   // A or 1 - A (0 on rows with missing A)
  Eigen::VectorXd ps;          // P_A or 1 - P_A
  Eigen::VectorXd impute;      // pi or 1 - pi (TR only; may be empty)
  Eigen::VectorXd prediction;  // E[Y | A = arm, X]
};

Arm make_arm(const Dataset& data, int exposure, const Eigen::VectorXd& ps_prob, const NuisanceFit& outcome,
             const Eigen::VectorXd& impute_prob = {});

// ---------------------------------------------------------------------------
// Nuisance stages.

/// Missingness fit, with a degenerate P_R = 0 fit when no exposure is missing.
NuisanceFit fit_missingness_or_degenerate(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts);

struct IpwNuisance {
  NuisanceFit missingness;
  NuisanceFit ps;       // alpha (WLA)
  NuisanceFit outcome;  // beta (WLA)
  Eigen::VectorXd weights;
};

IpwNuisance fit_ipw_nuisance(const Dataset& data, const SpecBundle& specs, const SolveOptions& opts = {});

struct TrNuisance {
  NuisanceFit missingness;
  NuisanceFit imputation;
  NuisanceFit ps;       // alpha (EE)
  NuisanceFit outcome;  // beta (EE)
  Eigen::VectorXd impute_prob;
  Eigen::VectorXd weights;
  Eigen::VectorXd augmentation;
  int bayes_iterations = 0;
  bool bayes_clamped = false;
};

TrNuisance fit_tr_nuisance(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});

// ---------------------------------------------------------------------------
// Per-arm functionals. All return the arm mean (tau1 for the exposed arm).

double ipw_ipw_arm(const Eigen::VectorXd& weights, const Arm& arm, const Eigen::VectorXd& y);
double ipw_dr_arm(const Eigen::VectorXd& weights, const Arm& arm, const Eigen::VectorXd& y);
/// TR-AIPW with separate outcome predictions for the weighted Q term
/// (`plugin`) and the augmentation E[Q | X, Y] (`augment`).
double tr_aipw_arm(const Eigen::VectorXd& weights, const Eigen::VectorXd& augmentation, const Arm& arm,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& plugin, const Eigen::VectorXd& augment);
/// Complete-data AIPW.
double dr_arm(const Arm& arm, const Eigen::VectorXd& y);

struct WeeArm {
  Eigen::VectorXd beta;
  double tau = 0.0;
  int iterations = 0;
};

/// sum_i x_i w_i (ind_i / e_i) [y_i - expit(x_i' beta)].
Eigen::VectorXd ipw_wee_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& beta);
WeeArm solve_ipw_wee_arm(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                         const Eigen::VectorXd& y, const SolveOptions& opts = {});

/// sum_i x_i { w_i (ind_i / e_i) [y_i - expit(x_i' beta)] - c_i (pi_i / e_i) [y_i - m_i] }
/// with m_i the EE outcome prediction held in arm.prediction.
Eigen::VectorXd tr_wee_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights,
                             const Eigen::VectorXd& augmentation, const Arm& arm, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta);
/// Derivative of tr_wee_score in beta (the offset term does not depend on it).
Eigen::MatrixXd tr_wee_jacobian(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                                const Eigen::VectorXd& beta);
WeeArm solve_tr_wee_arm(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& augmentation, const Arm& arm, const Eigen::VectorXd& y,
                        const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Estimators.

EffectEstimate estimate_ipw_ipw(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});
EffectEstimate estimate_ipw_dr(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});
EffectEstimate estimate_ipw_wee(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});
EffectEstimate estimate_tr_aipw(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});
EffectEstimate estimate_tr_wee(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});
EffectEstimate estimate_dr_si(const Dataset& data, const SpecBundle& specs, std::uint64_t seed,
                              const EstimatorOptions& opts = {});
EffectEstimate estimate_dr_mice(const Dataset& data, const SpecBundle& specs, int m, std::uint64_t seed,
                                const EstimatorOptions& opts = {});

/// Dispatches on `method`; SI/MICE take seed and m from `opts`.
EffectEstimate estimate(Method method, const Dataset& data, const SpecBundle& specs,
                        const EstimatorOptions& opts = {});

struct IpwWeeDetail {
  IpwNuisance nuisance;
  WeeArm exposed;
  WeeArm unexposed;
  EffectEstimate estimate;
};
IpwWeeDetail estimate_ipw_wee_detail(const Dataset& data, const SpecBundle& specs,
                                     const EstimatorOptions& opts = {});

/// IPW-DR evaluated with outcome predictions expit(z' beta1), expit(z' beta0).
std::pair<double, double> ipw_dr_at(const Dataset& data, const IpwNuisance& nuisance, const Eigen::MatrixXd& z,
                                    const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta0);

struct TrWeeDetail {
  TrNuisance nuisance;
  WeeArm exposed;
  WeeArm unexposed;
  EffectEstimate estimate;
};
TrWeeDetail estimate_tr_wee_detail(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts = {});

/// TR-AIPW with the weighted Q term evaluated at the WEE coefficients and the
/// augmentation at the EE outcome fit.
std::pair<double, double> tr_aipw_at(const Dataset& data, const TrNuisance& nuisance, const Eigen::MatrixXd& z,
                                     const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta0);

// ---------------------------------------------------------------------------
// Imputation helpers.

/// Fills missing exposures with Bernoulli(prob) draws taken in canonical row
/// order; returns a complete dataset.
Dataset impute_exposure(const Dataset& data, const Eigen::VectorXd& prob, CounterRng& rng);

struct CompleteDataDr {
  double tau1 = 0.0;
  double tau0 = 0.0;
  double var_log_tau = 0.0;  // influence-function based, nuisance treated as known
  int iterations = 0;
  bool clamped = false;
};

/// Complete-data AIPW with unweighted PS and outcome fits.
CompleteDataDr dr_complete(const Dataset& complete, const SpecBundle& specs, const SolveOptions& opts = {});

struct RubinPooled {
  double log_tau = 0.0;
  double logit_tau1 = 0.0;
  double logit_tau0 = 0.0;
  double within = 0.0;
  double between = 0.0;
  double total = 0.0;
};

/// Rubin's rules on the log-OR scale. tau1/tau0 are pooled on the logit scale
/// so that the pooled odds ratio recomposes exactly.
RubinPooled rubin_pool(const std::vector<CompleteDataDr>& per_imputation);

}  // namespace misexp
