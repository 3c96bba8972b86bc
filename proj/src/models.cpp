#include "misexp/models.hpp"

#include <algorithm>
#include <set>

#include "misexp/errors.hpp"

namespace misexp {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Missingness: return "missingness";
    case ModelKind::Imputation: return "imputation";
    case ModelKind::PropensityScore: return "ps";
    case ModelKind::Outcome: return "outcome";
  }
  return "unknown";
}

ModelSpec ModelSpec::missingness(std::vector<int> covariates, bool with_outcome) {
  return {ModelKind::Missingness, std::move(covariates), with_outcome, false};
}

ModelSpec ModelSpec::imputation(std::vector<int> covariates, bool with_outcome) {
  return {ModelKind::Imputation, std::move(covariates), with_outcome, false};
}

ModelSpec ModelSpec::propensity(std::vector<int> covariates) {
  return {ModelKind::PropensityScore, std::move(covariates), false, false};
}

ModelSpec ModelSpec::outcome(std::vector<int> covariates, bool with_exposure) {
  return {ModelKind::Outcome, std::move(covariates), false, with_exposure};
}

ModelSpec ModelSpec::full(ModelKind kind, Index p) {
  std::vector<int> all(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = static_cast<int>(j + 1);
  switch (kind) {
    case ModelKind::Missingness: return missingness(std::move(all));
    case ModelKind::Imputation: return imputation(std::move(all));
    case ModelKind::PropensityScore: return propensity(std::move(all));
    case ModelKind::Outcome: return outcome(std::move(all));
  }
  return propensity(std::move(all));
}

void ModelSpec::validate(Index p) const {
  std::set<int> seen;
  for (const int c : covariates) {
    if (c < 1 || c > p) {
      throw ConfigError(to_string(kind) + " model: covariate index " + std::to_string(c) + " outside 1.." +
                        std::to_string(p));
    }
    if (!seen.insert(c).second) {
      throw ConfigError(to_string(kind) + " model: duplicate covariate index " + std::to_string(c));
    }
  }
  const bool outcome_allowed = kind == ModelKind::Missingness || kind == ModelKind::Imputation;
  if (include_outcome && !outcome_allowed) {
    throw ConfigError(to_string(kind) + " model cannot include the outcome");
  }
  if (include_exposure && kind != ModelKind::Outcome) {
    throw ConfigError(to_string(kind) + " model cannot include the exposure");
  }
}

Eigen::MatrixXd covariate_design(const Dataset& data, const ModelSpec& spec) {
  const Index k = 1 + static_cast<Index>(spec.covariates.size());
  Eigen::MatrixXd z(data.n(), k);
  z.col(0).setOnes();
  for (Index j = 1; j < k; ++j) z.col(j) = data.x.col(spec.covariates[static_cast<std::size_t>(j - 1)]);
  return z;
}

Eigen::MatrixXd design(const Dataset& data, const ModelSpec& spec, std::optional<double> exposure) {
  const Index base = 1 + static_cast<Index>(spec.covariates.size());
  const bool extra = spec.include_outcome || spec.include_exposure;
  Eigen::MatrixXd z(data.n(), base + (extra ? 1 : 0));
  z.leftCols(base) = covariate_design(data, spec);
  if (spec.include_outcome) {
    z.col(base) = data.y;
  } else if (spec.include_exposure) {
    if (exposure) {
      z.col(base).setConstant(*exposure);
    } else {
      z.col(base) = data.a;
    }
  }
  return z;
}

bool clamp_probabilities(Eigen::VectorXd& p) {
  bool moved = false;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) < kProbClamp) {
      p(i) = kProbClamp;
      moved = true;
    } else if (p(i) > 1.0 - kProbClamp) {
      p(i) = 1.0 - kProbClamp;
      moved = true;
    }
  }
  return moved;
}

Eigen::VectorXd missingness_weights(const Dataset& data, const Eigen::VectorXd& p_missing) {
  return ((1.0 - data.r.array()) / (1.0 - p_missing.array())).matrix();
}

Eigen::VectorXd augmentation_coefficients(const Dataset& data, const Eigen::VectorXd& p_missing) {
  return ((p_missing.array() - data.r.array()) / (1.0 - p_missing.array())).matrix();
}

namespace {

void require_kind(const ModelSpec& spec, ModelKind kind, const char* who) {
  if (spec.kind != kind) {
    throw ConfigError(std::string(who) + ": expected a " + to_string(kind) + " spec, got " + to_string(spec.kind));
  }
}

void require_length(const Dataset& data, const Eigen::VectorXd& v, const char* who) {
  if (v.size() != data.n()) throw ConfigError(std::string(who) + ": probability vector length mismatch");
}

NuisanceFit finish_fit(const ModelSpec& spec, const Eigen::VectorXd& coef, int iterations, Eigen::VectorXd fitted) {
  NuisanceFit fit;
  fit.spec = spec;
  fit.coef = coef;
  fit.iterations = iterations;
  fit.clamped = clamp_probabilities(fitted);
  fit.fitted = std::move(fitted);
  return fit;
}

NuisanceFit finish_outcome_fit(const Dataset& data, const ModelSpec& spec, const Eigen::VectorXd& coef,
                               int iterations) {
  NuisanceFit fit = finish_fit(spec, coef, iterations, expit(design(data, spec, 1.0) * coef));
  Eigen::VectorXd f0 = expit(design(data, spec, 0.0) * coef);
  fit.clamped = clamp_probabilities(f0) || fit.clamped;
  fit.fitted0 = std::move(f0);
  return fit;
}

}  // namespace

NuisanceFit fit_missingness(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  require_kind(spec, ModelKind::Missingness, "fit_missingness");
  spec.validate(data.p());
  const double missing = data.r.sum();
  if (missing == 0.0 || missing == static_cast<double>(data.n())) {
    throw EmptyClassError("fit_missingness: missing indicator is constant");
  }
  const Eigen::MatrixXd z = design(data, spec);
  const auto res = fit_weighted_logistic(z, data.r, Eigen::VectorXd::Ones(data.n()), opts);
  return finish_fit(spec, res.coef, res.iterations, expit(z * res.coef));
}

NuisanceFit fit_imputation(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  require_kind(spec, ModelKind::Imputation, "fit_imputation");
  spec.validate(data.p());
  const Eigen::MatrixXd z = design(data, spec);
  const Eigen::VectorXd complete = (1.0 - data.r.array()).matrix();
  const double n_complete = complete.sum();
  const double n_exposed = complete.dot(data.a);
  if (n_exposed == 0.0 || n_exposed == n_complete) {
    throw EmptyClassError("fit_imputation: observed exposure is constant");
  }
  // Zero weight on incomplete rows is the complete-case fit.
  const auto res = fit_weighted_logistic(z, data.a, complete, opts);
  return finish_fit(spec, res.coef, res.iterations, expit(z * res.coef));
}

NuisanceFit fit_ps_wla(const Dataset& data, const NuisanceFit& miss, const ModelSpec& spec,
                       const SolveOptions& opts) {
  require_kind(miss.spec, ModelKind::Missingness, "fit_ps_wla");
  require_kind(spec, ModelKind::PropensityScore, "fit_ps_wla");
  spec.validate(data.p());
  require_length(data, miss.fitted, "fit_ps_wla");
  const Eigen::VectorXd w = missingness_weights(data, miss.fitted);
  const Eigen::MatrixXd z = design(data, spec);
  const auto res = fit_weighted_logistic(z, data.a, w, opts);
  NuisanceFit fit = finish_fit(spec, res.coef, res.iterations, expit(z * res.coef));
  fit.extreme_weights = (w.array() > kExtremeWeight).any();
  return fit;
}

NuisanceFit fit_outcome_wla(const Dataset& data, const NuisanceFit& miss, const ModelSpec& spec,
                            const SolveOptions& opts) {
  require_kind(miss.spec, ModelKind::Missingness, "fit_outcome_wla");
  require_kind(spec, ModelKind::Outcome, "fit_outcome_wla");
  spec.validate(data.p());
  require_length(data, miss.fitted, "fit_outcome_wla");
  const Eigen::VectorXd w = missingness_weights(data, miss.fitted);
  const auto res = fit_weighted_logistic(design(data, spec), data.y, w, opts);
  NuisanceFit fit = finish_outcome_fit(data, spec, res.coef, res.iterations);
  fit.extreme_weights = (w.array() > kExtremeWeight).any();
  return fit;
}

Eigen::VectorXd ps_ee_score(const Dataset& data, const Eigen::VectorXd& p_missing, const Eigen::VectorXd& impute_prob,
                            const ModelSpec& spec, const Eigen::VectorXd& alpha) {
  const Eigen::MatrixXd z = design(data, spec);
  const Eigen::ArrayXd w = missingness_weights(data, p_missing).array();
  const Eigen::ArrayXd c = augmentation_coefficients(data, p_missing).array();
  const Eigen::ArrayXd mu = expit(z * alpha).array();
  // w * U_i - c * m_A,i, both proportional to x_i.
  const Eigen::ArrayXd resid = w * (data.a.array() - mu) - c * (impute_prob.array() - mu);
  return z.transpose() * resid.matrix();
}

namespace {

Eigen::MatrixXd ps_ee_jacobian_impl(const Eigen::MatrixXd& z, const Eigen::ArrayXd& wc, const Eigen::VectorXd& alpha) {
  const Eigen::ArrayXd mu = expit(z * alpha).array();
  const Eigen::VectorXd v = (wc * mu * (1.0 - mu)).matrix();
  return -(z.transpose() * v.asDiagonal() * z);
}

}  // namespace

Eigen::MatrixXd ps_ee_jacobian(const Dataset& data, const Eigen::VectorXd& p_missing, const ModelSpec& spec,
                               const Eigen::VectorXd& alpha) {
  const Eigen::ArrayXd wc =
      missingness_weights(data, p_missing).array() - augmentation_coefficients(data, p_missing).array();
  return ps_ee_jacobian_impl(design(data, spec), wc, alpha);
}

NuisanceFit fit_ps_ee(const Dataset& data, const NuisanceFit& miss, const Eigen::VectorXd& impute_prob,
                      const ModelSpec& spec, const SolveOptions& opts) {
  require_kind(miss.spec, ModelKind::Missingness, "fit_ps_ee");
  require_kind(spec, ModelKind::PropensityScore, "fit_ps_ee");
  spec.validate(data.p());
  require_length(data, miss.fitted, "fit_ps_ee");
  require_length(data, impute_prob, "fit_ps_ee");

  const Eigen::MatrixXd z = design(data, spec);
  const Eigen::ArrayXd w = missingness_weights(data, miss.fitted).array();
  const Eigen::ArrayXd c = augmentation_coefficients(data, miss.fitted).array();
  const Eigen::ArrayXd wc = w - c;

  const ScoreFunction<double> score = [&](const Eigen::VectorXd& alpha) -> Eigen::VectorXd {
    const Eigen::ArrayXd mu = expit(z * alpha).array();
    const Eigen::ArrayXd resid = w * (data.a.array() - mu) - c * (impute_prob.array() - mu);
    return z.transpose() * resid.matrix();
  };
  const JacobianFunction<double> jacobian = [&](const Eigen::VectorXd& alpha) -> Eigen::MatrixXd {
    return ps_ee_jacobian_impl(z, wc, alpha);
  };
  const auto res = solve_estimating_equation<double>(score, jacobian, Eigen::VectorXd::Zero(z.cols()), opts);
  NuisanceFit fit = finish_fit(spec, res.coef, res.iterations, expit(z * res.coef));
  fit.extreme_weights = (w > kExtremeWeight).any();
  return fit;
}

NuisanceFit fit_ps_ee(const Dataset& data, const NuisanceFit& miss, const NuisanceFit& imp, const ModelSpec& spec,
                      const SolveOptions& opts) {
  require_kind(imp.spec, ModelKind::Imputation, "fit_ps_ee");
  return fit_ps_ee(data, miss, imp.fitted, spec, opts);
}

namespace {

struct OutcomeDesigns {
  Eigen::MatrixXd observed;
  Eigen::MatrixXd exposed;
  Eigen::MatrixXd unexposed;
};

OutcomeDesigns outcome_designs(const Dataset& data, const ModelSpec& spec) {
  return {design(data, spec), design(data, spec, 1.0), design(data, spec, 0.0)};
}

Eigen::VectorXd outcome_ee_score_impl(const OutcomeDesigns& z, const Dataset& data, const Eigen::ArrayXd& w,
                                      const Eigen::ArrayXd& c, const Eigen::ArrayXd& pi,
                                      const Eigen::VectorXd& beta) {
  const Eigen::ArrayXd y = data.y.array();
  const Eigen::ArrayXd mu_obs = expit(z.observed * beta).array();
  const Eigen::ArrayXd mu1 = expit(z.exposed * beta).array();
  const Eigen::ArrayXd mu0 = expit(z.unexposed * beta).array();
  return z.observed.transpose() * (w * (y - mu_obs)).matrix() -
         z.exposed.transpose() * (c * pi * (y - mu1)).matrix() -
         z.unexposed.transpose() * (c * (1.0 - pi) * (y - mu0)).matrix();
}

Eigen::MatrixXd outcome_ee_jacobian_impl(const OutcomeDesigns& z, const Eigen::ArrayXd& w, const Eigen::ArrayXd& c,
                                         const Eigen::ArrayXd& pi, const Eigen::VectorXd& beta) {
  const Eigen::ArrayXd mu_obs = expit(z.observed * beta).array();
  const Eigen::ArrayXd mu1 = expit(z.exposed * beta).array();
  const Eigen::ArrayXd mu0 = expit(z.unexposed * beta).array();
  const Eigen::VectorXd v_obs = (w * mu_obs * (1.0 - mu_obs)).matrix();
  const Eigen::VectorXd v1 = (c * pi * mu1 * (1.0 - mu1)).matrix();
  const Eigen::VectorXd v0 = (c * (1.0 - pi) * mu0 * (1.0 - mu0)).matrix();
  return -(z.observed.transpose() * v_obs.asDiagonal() * z.observed) +
         z.exposed.transpose() * v1.asDiagonal() * z.exposed + z.unexposed.transpose() * v0.asDiagonal() * z.unexposed;
}

}  // namespace

Eigen::MatrixXd outcome_ee_jacobian(const Dataset& data, const Eigen::VectorXd& p_missing,
                                    const Eigen::VectorXd& impute_prob, const ModelSpec& spec,
                                    const Eigen::VectorXd& beta) {
  return outcome_ee_jacobian_impl(outcome_designs(data, spec), missingness_weights(data, p_missing).array(),
                                  augmentation_coefficients(data, p_missing).array(), impute_prob.array(), beta);
}

Eigen::VectorXd outcome_ee_score(const Dataset& data, const Eigen::VectorXd& p_missing,
                                 const Eigen::VectorXd& impute_prob, const ModelSpec& spec,
                                 const Eigen::VectorXd& beta) {
  return outcome_ee_score_impl(outcome_designs(data, spec), data, missingness_weights(data, p_missing).array(),
                               augmentation_coefficients(data, p_missing).array(), impute_prob.array(), beta);
}

Eigen::MatrixXd outcome_score_expectation(const Dataset& data, const Eigen::VectorXd& impute_prob,
                                          const ModelSpec& spec, const Eigen::VectorXd& beta) {
  const auto z = outcome_designs(data, spec);
  const Eigen::ArrayXd y = data.y.array();
  const Eigen::ArrayXd pi = impute_prob.array();
  const Eigen::ArrayXd r1 = pi * (y - expit(z.exposed * beta).array());
  const Eigen::ArrayXd r0 = (1.0 - pi) * (y - expit(z.unexposed * beta).array());
  return (z.exposed.array().colwise() * r1 + z.unexposed.array().colwise() * r0).matrix();
}

NuisanceFit fit_outcome_ee(const Dataset& data, const NuisanceFit& miss, const Eigen::VectorXd& impute_prob,
                           const ModelSpec& spec, const SolveOptions& opts) {
  require_kind(miss.spec, ModelKind::Missingness, "fit_outcome_ee");
  require_kind(spec, ModelKind::Outcome, "fit_outcome_ee");
  spec.validate(data.p());
  require_length(data, miss.fitted, "fit_outcome_ee");
  require_length(data, impute_prob, "fit_outcome_ee");

  const auto z = outcome_designs(data, spec);
  const Eigen::ArrayXd w = missingness_weights(data, miss.fitted).array();
  const Eigen::ArrayXd c = augmentation_coefficients(data, miss.fitted).array();
  const Eigen::ArrayXd pi = impute_prob.array();

  const ScoreFunction<double> score = [&](const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    return outcome_ee_score_impl(z, data, w, c, pi, beta);
  };
  const JacobianFunction<double> jacobian = [&](const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
    return outcome_ee_jacobian_impl(z, w, c, pi, beta);
  };
  const auto res = solve_estimating_equation<double>(score, jacobian, Eigen::VectorXd::Zero(z.observed.cols()), opts);
  NuisanceFit fit = finish_outcome_fit(data, spec, res.coef, res.iterations);
  fit.extreme_weights = (w > kExtremeWeight).any();
  return fit;
}

NuisanceFit fit_outcome_ee(const Dataset& data, const NuisanceFit& miss, const NuisanceFit& imp,
                           const ModelSpec& spec, const SolveOptions& opts) {
  require_kind(imp.spec, ModelKind::Imputation, "fit_outcome_ee");
  return fit_outcome_ee(data, miss, imp.fitted, spec, opts);
}

BayesImputation bayes_imputation(const Eigen::VectorXd& ps_prob, const Eigen::VectorXd& outcome_prob_a1,
                                 const Eigen::VectorXd& outcome_prob_a0, const Eigen::VectorXd& y) {
  const Index n = y.size();
  if (ps_prob.size() != n || outcome_prob_a1.size() != n || outcome_prob_a0.size() != n) {
    throw ConfigError("bayes_imputation: length mismatch");
  }
  BayesImputation out;
  out.prob.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double e = ps_prob(i);
    const double lik1 = y(i) == 1.0 ? outcome_prob_a1(i) : 1.0 - outcome_prob_a1(i);
    const double lik0 = y(i) == 1.0 ? outcome_prob_a0(i) : 1.0 - outcome_prob_a0(i);
    const double joint1 = lik1 * e;
    out.prob(i) = joint1 / (joint1 + lik0 * (1.0 - e));
  }
  out.clamped = clamp_probabilities(out.prob);
  return out;
}

BayesImputation bayes_imputation(const NuisanceFit& ps, const NuisanceFit& outcome, const Dataset& data) {
  require_kind(ps.spec, ModelKind::PropensityScore, "bayes_imputation");
  require_kind(outcome.spec, ModelKind::Outcome, "bayes_imputation");
  return bayes_imputation(ps.fitted, outcome.fitted, outcome.fitted0, data.y);
}

}  // namespace misexp
