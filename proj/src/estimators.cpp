#include "misexp/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "misexp/errors.hpp"
#include "misexp/glm.hpp"

namespace misexp {

std::string to_string(Method method) {
  switch (method) {
    case Method::IpwIpw: return "IPW-IPW";
    case Method::IpwDr: return "IPW-DR";
    case Method::IpwWee: return "IPW-WEE";
    case Method::TrAipw: return "TR-AIPW";
    case Method::TrWee: return "TR-WEE";
    case Method::DrSi: return "DR-SI";
    case Method::DrMice: return "DR-MICE";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::IpwIpw, Method::IpwDr, Method::IpwWee, Method::TrAipw,
                                              Method::TrWee,  Method::DrSi,  Method::DrMice};
  return methods;
}

Method parse_method(const std::string& tag) {
  std::string norm;
  for (const char ch : tag) {
    norm.push_back(ch == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  for (const Method m : all_methods()) {
    if (to_string(m) == norm) return m;
  }
  throw ConfigError("unknown method '" + tag + "'");
}

bool uses_imputation(Method method) {
  return method == Method::TrAipw || method == Method::TrWee || method == Method::DrSi ||
         method == Method::DrMice;
}

bool is_stochastic(Method method) { return method == Method::DrSi || method == Method::DrMice; }

SpecBundle SpecBundle::all_correct(Index p) {
  SpecBundle b;
  b.missingness = ModelSpec::full(ModelKind::Missingness, p);
  b.imputation = ModelSpec::full(ModelKind::Imputation, p);
  b.ps = ModelSpec::full(ModelKind::PropensityScore, p);
  b.outcome = ModelSpec::full(ModelKind::Outcome, p);
  return b;
}

void SpecBundle::validate(Index p, Method method) const {
  const auto check = [p](const ModelSpec& s, ModelKind kind, const char* slot) {
    if (s.kind != kind) throw ConfigError(std::string("spec bundle: slot '") + slot + "' holds a " + to_string(s.kind) + " spec");
    s.validate(p);
  };
  check(missingness, ModelKind::Missingness, "missingness");
  check(ps, ModelKind::PropensityScore, "ps");
  check(outcome, ModelKind::Outcome, "outcome");
  if (imputation) check(*imputation, ModelKind::Imputation, "imputation");
  if (uses_imputation(method) && !imputation) {
    throw ConfigError(to_string(method) + " requires an imputation model spec");
  }
}

double odds_ratio(double tau1, double tau0) { return (tau1 / (1.0 - tau1)) / (tau0 / (1.0 - tau0)); }

EffectEstimate make_estimate(Method method, double tau1, double tau0, Diagnostics diag) {
  if (!std::isfinite(tau1) || !std::isfinite(tau0)) {
    throw DegenerateArmError(to_string(method) + ": arm mean is not finite");
  }
  const auto clamp = [&diag](double t) {
    const double c = std::clamp(t, kProbClamp, 1.0 - kProbClamp);
    diag.clamped_tau = diag.clamped_tau || c != t;
    return c;
  };
  EffectEstimate est;
  est.method = method;
  est.tau1 = clamp(tau1);
  est.tau0 = clamp(tau0);
  est.tau = odds_ratio(est.tau1, est.tau0);
  est.diagnostics = std::move(diag);
  return est;
}

Arm make_arm(const Dataset& data, int exposure, const Eigen::VectorXd& ps_prob, const NuisanceFit& outcome,
             const Eigen::VectorXd& impute_prob) {
  const Eigen::ArrayXd observed = 1.0 - data.r.array();
  Arm arm;
  if (exposure == 1) {
    arm.indicator = (observed * data.a.array()).matrix();
    arm.ps = ps_prob;
    arm.impute = impute_prob;
    arm.prediction = outcome.fitted;
  } else {
    arm.indicator = (observed * (1.0 - data.a.array())).matrix();
    arm.ps = (1.0 - ps_prob.array()).matrix();
    if (impute_prob.size() > 0) arm.impute = (1.0 - impute_prob.array()).matrix();
    arm.prediction = outcome.fitted0;
  }
  return arm;
}

// ---------------------------------------------------------------------------

NuisanceFit fit_missingness_or_degenerate(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  if (data.r.sum() == 0.0) {
    spec.validate(data.p());
    NuisanceFit fit;
    fit.spec = spec;
    fit.coef = Eigen::VectorXd::Zero(spec.n_coef());
    fit.fitted = Eigen::VectorXd::Zero(data.n());
    return fit;
  }
  return fit_missingness(data, spec, opts);
}

IpwNuisance fit_ipw_nuisance(const Dataset& data, const SpecBundle& specs, const SolveOptions& opts) {
  IpwNuisance nu;
  nu.missingness = fit_missingness_or_degenerate(data, specs.missingness, opts);
  nu.weights = missingness_weights(data, nu.missingness.fitted);
  nu.ps = fit_ps_wla(data, nu.missingness, specs.ps, opts);
  nu.outcome = fit_outcome_wla(data, nu.missingness, specs.outcome, opts);
  return nu;
}

TrNuisance fit_tr_nuisance(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  if (!specs.imputation) throw ConfigError("TR estimators require an imputation model spec");
  TrNuisance nu;
  nu.missingness = fit_missingness_or_degenerate(data, specs.missingness, opts.solve);
  nu.weights = missingness_weights(data, nu.missingness.fitted);
  nu.augmentation = augmentation_coefficients(data, nu.missingness.fitted);
  nu.imputation = fit_imputation(data, *specs.imputation, opts.solve);
  nu.impute_prob = nu.imputation.fitted;
  nu.ps = fit_ps_ee(data, nu.missingness, nu.impute_prob, specs.ps, opts.solve);
  nu.outcome = fit_outcome_ee(data, nu.missingness, nu.impute_prob, specs.outcome, opts.solve);

  if (specs.use_bayes_fallback) {
    // Replace pi by the Bayes posterior implied by the PS and outcome fits and
    // refit until the two agree.
    for (int k = 1;; ++k) {
      const BayesImputation bayes = bayes_imputation(nu.ps, nu.outcome, data);
      const double change = (bayes.prob - nu.impute_prob).lpNorm<Eigen::Infinity>();
      nu.impute_prob = bayes.prob;
      nu.bayes_clamped = bayes.clamped;
      nu.ps = fit_ps_ee(data, nu.missingness, nu.impute_prob, specs.ps, opts.solve);
      nu.outcome = fit_outcome_ee(data, nu.missingness, nu.impute_prob, specs.outcome, opts.solve);
      nu.bayes_iterations = k;
      if (change <= opts.bayes_tolerance) break;
      if (k >= opts.bayes_max_iterations) {
        throw ConvergenceError("Bayes imputation fixed point did not converge");
      }
    }
  }
  return nu;
}

// ---------------------------------------------------------------------------

double ipw_ipw_arm(const Eigen::VectorXd& weights, const Arm& arm, const Eigen::VectorXd& y) {
  return (weights.array() * arm.indicator.array() * y.array() / arm.ps.array()).mean();
}

double ipw_dr_arm(const Eigen::VectorXd& weights, const Arm& arm, const Eigen::VectorXd& y) {
  const Eigen::ArrayXd m = arm.prediction.array();
  return (weights.array() * (arm.indicator.array() / arm.ps.array() * (y.array() - m) + m)).mean();
}

double tr_aipw_arm(const Eigen::VectorXd& weights, const Eigen::VectorXd& augmentation, const Arm& arm,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& plugin, const Eigen::VectorXd& augment) {
  const Eigen::ArrayXd e = arm.ps.array();
  const Eigen::ArrayXd ind = arm.indicator.array();
  const Eigen::ArrayXd pi = arm.impute.array();
  const Eigen::ArrayXd q = ind * y.array() / e - (ind - e) / e * plugin.array();
  const Eigen::ArrayXd q_expected = pi * y.array() / e - (pi - e) / e * augment.array();
  return (weights.array() * q - augmentation.array() * q_expected).mean();
}

double dr_arm(const Arm& arm, const Eigen::VectorXd& y) {
  const Eigen::ArrayXd e = arm.ps.array();
  const Eigen::ArrayXd ind = arm.indicator.array();
  return (ind * y.array() / e - (ind - e) / e * arm.prediction.array()).mean();
}

Eigen::VectorXd ipw_wee_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd v = (weights.array() * arm.indicator.array() / arm.ps.array()).matrix();
  return logistic_score(z, y, v, beta);
}

WeeArm solve_ipw_wee_arm(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                         const Eigen::VectorXd& y, const SolveOptions& opts) {
  const Eigen::VectorXd v = (weights.array() * arm.indicator.array() / arm.ps.array()).matrix();
  const auto res = fit_weighted_logistic(z, y, v, opts);
  WeeArm out;
  out.beta = res.coef;
  out.iterations = res.iterations;
  out.tau = (weights.array() * expit(z * res.coef).array()).mean();
  return out;
}

namespace {

struct TrWeeTerms {
  Eigen::ArrayXd v;       // w * ind / e
  Eigen::ArrayXd offset;  // c * (pi / e) * (y - m)
};

TrWeeTerms tr_wee_terms(const Eigen::VectorXd& weights, const Eigen::VectorXd& augmentation, const Arm& arm,
                        const Eigen::VectorXd& y) {
  const Eigen::ArrayXd e = arm.ps.array();
  return {weights.array() * arm.indicator.array() / e,
          augmentation.array() * arm.impute.array() / e * (y.array() - arm.prediction.array())};
}

}  // namespace

Eigen::VectorXd tr_wee_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights,
                             const Eigen::VectorXd& augmentation, const Arm& arm, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta) {
  const TrWeeTerms t = tr_wee_terms(weights, augmentation, arm, y);
  const Eigen::ArrayXd mu = expit(z * beta).array();
  return z.transpose() * (t.v * (y.array() - mu) - t.offset).matrix();
}

Eigen::MatrixXd tr_wee_jacobian(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights, const Arm& arm,
                                const Eigen::VectorXd& beta) {
  const Eigen::VectorXd v = (weights.array() * arm.indicator.array() / arm.ps.array()).matrix();
  return logistic_score_jacobian(z, v, beta);
}

WeeArm solve_tr_wee_arm(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& augmentation, const Arm& arm, const Eigen::VectorXd& y,
                        const SolveOptions& opts) {
  const TrWeeTerms t = tr_wee_terms(weights, augmentation, arm, y);
  const ScoreFunction<double> score = [&](const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    const Eigen::ArrayXd mu = expit(z * beta).array();
    return z.transpose() * (t.v * (y.array() - mu) - t.offset).matrix();
  };
  const JacobianFunction<double> jacobian = [&](const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
    return logistic_score_jacobian(z, t.v.matrix(), beta);
  };
  const auto res = solve_estimating_equation<double>(score, jacobian, Eigen::VectorXd::Zero(z.cols()), opts);
  WeeArm out;
  out.beta = res.coef;
  out.iterations = res.iterations;
  const Eigen::ArrayXd m = arm.prediction.array();
  out.tau = (weights.array() * (expit(z * res.coef).array() - m)).mean() + m.mean();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double max_joint_weight(const Eigen::VectorXd& w, const Arm& a1, const Arm& a0) {
  const Eigen::ArrayXd j1 = w.array() * a1.indicator.array() / a1.ps.array();
  const Eigen::ArrayXd j0 = w.array() * a0.indicator.array() / a0.ps.array();
  return std::max(j1.maxCoeff(), j0.maxCoeff());
}

Diagnostics ipw_diagnostics(const IpwNuisance& nu, bool with_outcome) {
  Diagnostics d;
  d.clamped_probabilities = nu.missingness.clamped || nu.ps.clamped || (with_outcome && nu.outcome.clamped);
  d.extreme_weights = nu.ps.extreme_weights;
  d.solver_iterations = nu.missingness.iterations + nu.ps.iterations + (with_outcome ? nu.outcome.iterations : 0);
  return d;
}

Diagnostics tr_diagnostics(const TrNuisance& nu) {
  Diagnostics d;
  d.clamped_probabilities = nu.missingness.clamped || nu.imputation.clamped || nu.ps.clamped ||
                            nu.outcome.clamped || nu.bayes_clamped;
  d.extreme_weights = nu.ps.extreme_weights;
  d.solver_iterations =
      nu.missingness.iterations + nu.imputation.iterations + nu.ps.iterations + nu.outcome.iterations;
  d.bayes_iterations = nu.bayes_iterations;
  return d;
}

void validate_inputs(const Dataset& data, const SpecBundle& specs, Method method) {
  data.validate();
  specs.validate(data.p(), method);
}

}  // namespace

EffectEstimate estimate_ipw_ipw(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::IpwIpw);
  IpwNuisance nu;
  nu.missingness = fit_missingness_or_degenerate(data, specs.missingness, opts.solve);
  nu.weights = missingness_weights(data, nu.missingness.fitted);
  nu.ps = fit_ps_wla(data, nu.missingness, specs.ps, opts.solve);
  nu.outcome.fitted = nu.outcome.fitted0 = Eigen::VectorXd::Zero(data.n());

  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome);
  Diagnostics d = ipw_diagnostics(nu, false);
  d.max_weight = max_joint_weight(nu.weights, a1, a0);
  return make_estimate(Method::IpwIpw, ipw_ipw_arm(nu.weights, a1, data.y), ipw_ipw_arm(nu.weights, a0, data.y),
                       d);
}

EffectEstimate estimate_ipw_dr(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::IpwDr);
  const IpwNuisance nu = fit_ipw_nuisance(data, specs, opts.solve);
  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome);
  Diagnostics d = ipw_diagnostics(nu, true);
  d.max_weight = max_joint_weight(nu.weights, a1, a0);
  return make_estimate(Method::IpwDr, ipw_dr_arm(nu.weights, a1, data.y), ipw_dr_arm(nu.weights, a0, data.y), d);
}

IpwWeeDetail estimate_ipw_wee_detail(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::IpwWee);
  IpwWeeDetail out;
  out.nuisance = fit_ipw_nuisance(data, specs, opts.solve);
  const IpwNuisance& nu = out.nuisance;
  const Eigen::MatrixXd z = covariate_design(data, specs.outcome);
  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome);
  out.exposed = solve_ipw_wee_arm(z, nu.weights, a1, data.y, opts.solve);
  out.unexposed = solve_ipw_wee_arm(z, nu.weights, a0, data.y, opts.solve);
  Diagnostics d = ipw_diagnostics(nu, true);
  d.solver_iterations += out.exposed.iterations + out.unexposed.iterations;
  d.max_weight = max_joint_weight(nu.weights, a1, a0);
  out.estimate = make_estimate(Method::IpwWee, out.exposed.tau, out.unexposed.tau, d);
  return out;
}

EffectEstimate estimate_ipw_wee(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  return estimate_ipw_wee_detail(data, specs, opts).estimate;
}

std::pair<double, double> ipw_dr_at(const Dataset& data, const IpwNuisance& nu, const Eigen::MatrixXd& z,
                                    const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta0) {
  Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome);
  Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome);
  a1.prediction = expit(z * beta1);
  a0.prediction = expit(z * beta0);
  return {ipw_dr_arm(nu.weights, a1, data.y), ipw_dr_arm(nu.weights, a0, data.y)};
}

EffectEstimate estimate_tr_aipw(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::TrAipw);
  const TrNuisance nu = fit_tr_nuisance(data, specs, opts);
  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome, nu.impute_prob);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome, nu.impute_prob);
  Diagnostics d = tr_diagnostics(nu);
  d.max_weight = max_joint_weight(nu.weights, a1, a0);
  const double t1 = tr_aipw_arm(nu.weights, nu.augmentation, a1, data.y, a1.prediction, a1.prediction);
  const double t0 = tr_aipw_arm(nu.weights, nu.augmentation, a0, data.y, a0.prediction, a0.prediction);
  return make_estimate(Method::TrAipw, t1, t0, d);
}

TrWeeDetail estimate_tr_wee_detail(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::TrWee);
  TrWeeDetail out;
  out.nuisance = fit_tr_nuisance(data, specs, opts);
  const TrNuisance& nu = out.nuisance;
  const Eigen::MatrixXd z = covariate_design(data, specs.outcome);
  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome, nu.impute_prob);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome, nu.impute_prob);
  out.exposed = solve_tr_wee_arm(z, nu.weights, nu.augmentation, a1, data.y, opts.solve);
  out.unexposed = solve_tr_wee_arm(z, nu.weights, nu.augmentation, a0, data.y, opts.solve);
  Diagnostics d = tr_diagnostics(nu);
  d.solver_iterations += out.exposed.iterations + out.unexposed.iterations;
  d.max_weight = max_joint_weight(nu.weights, a1, a0);
  out.estimate = make_estimate(Method::TrWee, out.exposed.tau, out.unexposed.tau, d);
  return out;
}

EffectEstimate estimate_tr_wee(const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  return estimate_tr_wee_detail(data, specs, opts).estimate;
}

std::pair<double, double> tr_aipw_at(const Dataset& data, const TrNuisance& nu, const Eigen::MatrixXd& z,
                                     const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta0) {
  const Arm a1 = make_arm(data, 1, nu.ps.fitted, nu.outcome, nu.impute_prob);
  const Arm a0 = make_arm(data, 0, nu.ps.fitted, nu.outcome, nu.impute_prob);
  const Eigen::VectorXd p1 = expit(z * beta1);
  const Eigen::VectorXd p0 = expit(z * beta0);
  return {tr_aipw_arm(nu.weights, nu.augmentation, a1, data.y, p1, a1.prediction),
          tr_aipw_arm(nu.weights, nu.augmentation, a0, data.y, p0, a0.prediction)};
}

// ---------------------------------------------------------------------------

Dataset impute_exposure(const Dataset& data, const Eigen::VectorXd& prob, CounterRng& rng) {
  if (prob.size() != data.n()) throw ConfigError("impute_exposure: probability length mismatch");
  Dataset out = data;
  for (const Index i : canonical_order(data)) {
    if (data.r(i) == 1.0) {
      out.a(i) = rng.bernoulli(prob(i)) ? 1.0 : 0.0;
      out.r(i) = 0.0;
    }
  }
  return out;
}

CompleteDataDr dr_complete(const Dataset& complete, const SpecBundle& specs, const SolveOptions& opts) {
  if (complete.r.sum() != 0.0) throw ConfigError("dr_complete: dataset has missing exposures");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(complete.n());
  const double exposed = complete.a.sum();
  if (exposed == 0.0 || exposed == static_cast<double>(complete.n())) {
    throw EmptyClassError("dr_complete: exposure is constant");
  }

  const Eigen::MatrixXd zps = design(complete, specs.ps);
  const auto ps = fit_weighted_logistic(zps, complete.a, ones, opts);
  const Eigen::MatrixXd zout = design(complete, specs.outcome);
  const auto out = fit_weighted_logistic(zout, complete.y, ones, opts);

  CompleteDataDr res;
  res.iterations = ps.iterations + out.iterations;
  Eigen::VectorXd e = expit(zps * ps.coef);
  Eigen::VectorXd m1 = expit(design(complete, specs.outcome, 1.0) * out.coef);
  Eigen::VectorXd m0 = expit(design(complete, specs.outcome, 0.0) * out.coef);
  res.clamped = clamp_probabilities(e);
  res.clamped = clamp_probabilities(m1) || res.clamped;
  res.clamped = clamp_probabilities(m0) || res.clamped;

  const Arm a1{complete.a, e, {}, m1};
  const Arm a0{(1.0 - complete.a.array()).matrix(), (1.0 - e.array()).matrix(), {}, m0};
  res.tau1 = std::clamp(dr_arm(a1, complete.y), kProbClamp, 1.0 - kProbClamp);
  res.tau0 = std::clamp(dr_arm(a0, complete.y), kProbClamp, 1.0 - kProbClamp);

  // Influence-function variance of (tau1, tau0) mapped to log(OR).
  const auto q = [&](const Arm& a) {
    const Eigen::ArrayXd ea = a.ps.array();
    const Eigen::ArrayXd ind = a.indicator.array();
    return Eigen::ArrayXd(ind * complete.y.array() / ea - (ind - ea) / ea * a.prediction.array());
  };
  const Eigen::ArrayXd phi1 = q(a1) - res.tau1;
  const Eigen::ArrayXd phi0 = q(a0) - res.tau0;
  const double n = static_cast<double>(complete.n());
  const double v1 = phi1.square().sum() / (n * n);
  const double v0 = phi0.square().sum() / (n * n);
  const double c10 = (phi1 * phi0).sum() / (n * n);
  const double g1 = res.tau1 * (1.0 - res.tau1);
  const double g0 = res.tau0 * (1.0 - res.tau0);
  res.var_log_tau = v1 / (g1 * g1) + v0 / (g0 * g0) - 2.0 * c10 / (g1 * g0);
  return res;
}

RubinPooled rubin_pool(const std::vector<CompleteDataDr>& per_imputation) {
  if (per_imputation.empty()) throw ConfigError("rubin_pool: no imputations");
  const auto m = static_cast<double>(per_imputation.size());
  RubinPooled p;
  std::vector<double> logs;
  for (const auto& r : per_imputation) {
    const double l1 = logit(r.tau1);
    const double l0 = logit(r.tau0);
    p.logit_tau1 += l1 / m;
    p.logit_tau0 += l0 / m;
    p.within += r.var_log_tau / m;
    logs.push_back(l1 - l0);
  }
  p.log_tau = p.logit_tau1 - p.logit_tau0;
  if (logs.size() > 1) {
    double ss = 0.0;
    for (const double l : logs) ss += (l - p.log_tau) * (l - p.log_tau);
    p.between = ss / (m - 1.0);
  }
  p.total = p.within + (1.0 + 1.0 / m) * p.between;
  return p;
}

EffectEstimate estimate_dr_si(const Dataset& data, const SpecBundle& specs, std::uint64_t seed,
                              const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::DrSi);
  const NuisanceFit imp = fit_imputation(data, *specs.imputation, opts.solve);
  CounterRng rng(seed);
  const Dataset complete = impute_exposure(data, imp.fitted, rng);
  const CompleteDataDr dr = dr_complete(complete, specs, opts.solve);
  Diagnostics d;
  d.clamped_probabilities = imp.clamped || dr.clamped;
  d.solver_iterations = imp.iterations + dr.iterations;
  return make_estimate(Method::DrSi, dr.tau1, dr.tau0, d);
}

EffectEstimate estimate_dr_mice(const Dataset& data, const SpecBundle& specs, int m, std::uint64_t seed,
                                const EstimatorOptions& opts) {
  validate_inputs(data, specs, Method::DrMice);
  if (m < 2) throw ConfigError("DR-MICE needs at least 2 imputations");
  const NuisanceFit imp = fit_imputation(data, *specs.imputation, opts.solve);

  // Normal approximation to the complete-case posterior of delta.
  const Eigen::MatrixXd z = design(data, imp.spec);
  const Eigen::ArrayXd mu = expit(z * imp.coef).array();
  const Eigen::VectorXd v = ((1.0 - data.r.array()) * mu * (1.0 - mu)).matrix();
  const Eigen::MatrixXd info = z.transpose() * v.asDiagonal() * z;
  Eigen::LLT<Eigen::MatrixXd> info_llt(info);
  if (info_llt.info() != Eigen::Success) throw RankError("DR-MICE: imputation information is singular");
  const Eigen::MatrixXd cov = info_llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  const CounterRng master(seed);
  std::vector<CompleteDataDr> runs;
  Diagnostics d;
  d.clamped_probabilities = imp.clamped;
  d.solver_iterations = imp.iterations;
  for (int k = 0; k < m; ++k) {
    CounterRng rng = master.split(static_cast<std::uint64_t>(k));
    std::normal_distribution<double> normal;
    Eigen::VectorXd eps(imp.coef.size());
    for (Index j = 0; j < eps.size(); ++j) eps(j) = normal(rng);
    const Eigen::VectorXd delta = imp.coef + chol * eps;
    const Eigen::VectorXd prob = expit(z * delta);
    const Dataset complete = impute_exposure(data, prob, rng);
    runs.push_back(dr_complete(complete, specs, opts.solve));
    d.clamped_probabilities = d.clamped_probabilities || runs.back().clamped;
    d.solver_iterations += runs.back().iterations;
  }
  const RubinPooled pooled = rubin_pool(runs);
  d.rubin_variance_log_tau = pooled.total;
  return make_estimate(Method::DrMice, expit(pooled.logit_tau1), expit(pooled.logit_tau0), d);
}

EffectEstimate estimate(Method method, const Dataset& data, const SpecBundle& specs, const EstimatorOptions& opts) {
  switch (method) {
    case Method::IpwIpw: return estimate_ipw_ipw(data, specs, opts);
    case Method::IpwDr: return estimate_ipw_dr(data, specs, opts);
    case Method::IpwWee: return estimate_ipw_wee(data, specs, opts);
    case Method::TrAipw: return estimate_tr_aipw(data, specs, opts);
    case Method::TrWee: return estimate_tr_wee(data, specs, opts);
    case Method::DrSi: return estimate_dr_si(data, specs, opts.seed, opts);
    case Method::DrMice: return estimate_dr_mice(data, specs, opts.mice_imputations, opts.seed, opts);
  }
  throw ConfigError("unknown method");
}

}  // namespace misexp
