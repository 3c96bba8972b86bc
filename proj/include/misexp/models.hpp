#pragma once

// The four nuisance models (missingness, imputation, propensity score,
// outcome), their complete-case / weighted-likelihood / augmented fits, and
// the Bayes-rule reconstruction of P(A = 1 | X, Y).

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/glm.hpp"

namespace misexp {

enum class ModelKind { Missingness, Imputation, PropensityScore, Outcome };

std::string to_string(ModelKind kind);

/// Which covariates enter a model. Misspecification is expressed by dropping
/// columns: a covariate, or Y from the missingness/imputation models.
struct ModelSpec {
  ModelKind kind = ModelKind::PropensityScore;
  std::vector<int> covariates;   // 1-based covariate indices
  bool include_outcome = false;  // Missingness / Imputation only
  bool include_exposure = false; // Outcome only

  static ModelSpec missingness(std::vector<int> covariates, bool with_outcome = true);
  static ModelSpec imputation(std::vector<int> covariates, bool with_outcome = true);
  static ModelSpec propensity(std::vector<int> covariates);
  static ModelSpec outcome(std::vector<int> covariates, bool with_exposure = true);

  /// All p covariates with the default extra term for the model kind.
  static ModelSpec full(ModelKind kind, Index p);

  void validate(Index p) const;
  Index n_coef() const { return 1 + static_cast<Index>(covariates.size()) + (include_outcome || include_exposure); }

  bool operator==(const ModelSpec&) const = default;
};

/// Fitted probabilities are clamped into [kProbClamp, 1 - kProbClamp] before any
/// reciprocal is taken.
inline constexpr double kProbClamp = 1e-6;
inline constexpr double kExtremeWeight = 100.0;

struct NuisanceFit {
  ModelSpec spec;
  Eigen::VectorXd coef;
  /// Fitted probability per row. For the outcome model this is P(Y=1 | A=1, X).
  Eigen::VectorXd fitted;
  /// Outcome model only: P(Y=1 | A=0, X).
  Eigen::VectorXd fitted0;
  bool clamped = false;
  bool extreme_weights = false;
  int iterations = 0;
};

/// Intercept plus the selected covariates.
Eigen::MatrixXd covariate_design(const Dataset& data, const ModelSpec& spec);

/// Full design for `spec`: covariate_design plus Y (include_outcome) or the
/// exposure (include_exposure). `exposure` overrides the observed A.
Eigen::MatrixXd design(const Dataset& data, const ModelSpec& spec, std::optional<double> exposure = std::nullopt);

/// Clamps into [kProbClamp, 1 - kProbClamp]; returns whether anything moved.
bool clamp_probabilities(Eigen::VectorXd& p);

/// Missingness weights (1 - R) / (1 - P_R).
Eigen::VectorXd missingness_weights(const Dataset& data, const Eigen::VectorXd& p_missing);

/// Augmentation coefficients (P_R - R) / (1 - P_R).
Eigen::VectorXd augmentation_coefficients(const Dataset& data, const Eigen::VectorXd& p_missing);

NuisanceFit fit_missingness(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts = {});
NuisanceFit fit_imputation(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts = {});
NuisanceFit fit_ps_wla(const Dataset& data, const NuisanceFit& miss, const ModelSpec& spec,
                       const SolveOptions& opts = {});
NuisanceFit fit_outcome_wla(const Dataset& data, const NuisanceFit& miss, const ModelSpec& spec,
                            const SolveOptions& opts = {});

/// Augmented PS fit. `impute_prob` is P(A=1 | X, Y) per row (from the
/// imputation model or the Bayes reconstruction).
NuisanceFit fit_ps_ee(const Dataset& data, const NuisanceFit& miss, const Eigen::VectorXd& impute_prob,
                      const ModelSpec& spec, const SolveOptions& opts = {});
NuisanceFit fit_ps_ee(const Dataset& data, const NuisanceFit& miss, const NuisanceFit& imp, const ModelSpec& spec,
                      const SolveOptions& opts = {});

NuisanceFit fit_outcome_ee(const Dataset& data, const NuisanceFit& miss, const Eigen::VectorXd& impute_prob,
                           const ModelSpec& spec, const SolveOptions& opts = {});
NuisanceFit fit_outcome_ee(const Dataset& data, const NuisanceFit& miss, const NuisanceFit& imp,
                           const ModelSpec& spec, const SolveOptions& opts = {});

/// Estimating functions of the augmented fits, evaluated at arbitrary
/// coefficients. Used by the solver and by the post-hoc residual checks.
Eigen::VectorXd ps_ee_score(const Dataset& data, const Eigen::VectorXd& p_missing, const Eigen::VectorXd& impute_prob,
                            const ModelSpec& spec, const Eigen::VectorXd& alpha);
Eigen::VectorXd outcome_ee_score(const Dataset& data, const Eigen::VectorXd& p_missing,
                                 const Eigen::VectorXd& impute_prob, const ModelSpec& spec,
                                 const Eigen::VectorXd& beta);

/// Analytic derivatives of the two functions above with respect to the
/// coefficients.
Eigen::MatrixXd ps_ee_jacobian(const Dataset& data, const Eigen::VectorXd& p_missing, const ModelSpec& spec,
                               const Eigen::VectorXd& alpha);
Eigen::MatrixXd outcome_ee_jacobian(const Dataset& data, const Eigen::VectorXd& p_missing,
                                    const Eigen::VectorXd& impute_prob, const ModelSpec& spec,
                                    const Eigen::VectorXd& beta);

/// m_Y(X_i, Y_i): the outcome score averaged over A in {0, 1} with weights
/// (1 - pi_i, pi_i). Row i of the result is the (p+2)-vector for row i.
Eigen::MatrixXd outcome_score_expectation(const Dataset& data, const Eigen::VectorXd& impute_prob,
                                          const ModelSpec& spec, const Eigen::VectorXd& beta);

struct BayesImputation {
  Eigen::VectorXd prob;
  bool clamped = false;
};

/// P(A=1 | X, Y=y) = P(Y=y | A=1, X) P(A=1 | X) / P(Y=y | X).
BayesImputation bayes_imputation(const Eigen::VectorXd& ps_prob, const Eigen::VectorXd& outcome_prob_a1,
                                 const Eigen::VectorXd& outcome_prob_a0, const Eigen::VectorXd& y);
BayesImputation bayes_imputation(const NuisanceFit& ps, const NuisanceFit& outcome, const Dataset& data);

}  // namespace misexp
