#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "misexp/estimators.hpp"
#include "misexp/models.hpp"
#include "misexp/simulation.hpp"
#include "support.hpp"

using namespace misexp;

namespace {

NuisanceFit constant_missingness(const Dataset& d, double p) {
  NuisanceFit fit;
  fit.spec = ModelSpec::full(ModelKind::Missingness, d.p());
  fit.coef = Eigen::VectorXd::Zero(fit.spec.n_coef());
  fit.fitted = Eigen::VectorXd::Constant(d.n(), p);
  return fit;
}

Eigen::VectorXd plain_fit(const Eigen::MatrixXd& z, const Eigen::VectorXd& target, const Eigen::VectorXd& rows) {
  return fit_weighted_logistic(z, target, rows).coef;
}

double max_abs(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

Dataset complete_copy(const Dataset& d, const Eigen::VectorXd& exposure) {
  std::vector<std::optional<int>> a(d.n());
  for (Index i = 0; i < d.n(); ++i) a[i] = static_cast<int>(exposure(i));
  return Dataset::from_columns(d.x.rightCols(d.p()), a, d.y, d.covariate_names);
}

}  // namespace

TEST_CASE("model specs reject invalid columns and extra terms") {
  CHECK_THROWS_AS(ModelSpec::propensity({1, 4}).validate(3), ConfigError);
  CHECK_THROWS_AS(ModelSpec::propensity({0}).validate(3), ConfigError);
  CHECK_THROWS_AS(ModelSpec::propensity({2, 2}).validate(3), ConfigError);
  ModelSpec ps = ModelSpec::propensity({1});
  ps.include_outcome = true;
  CHECK_THROWS_AS(ps.validate(3), ConfigError);
  ModelSpec miss = ModelSpec::missingness({1});
  miss.include_exposure = true;
  CHECK_THROWS_AS(miss.validate(3), ConfigError);
  CHECK(ModelSpec::outcome({1, 2, 3}).n_coef() == 5);
  CHECK(ModelSpec::missingness({1, 2}, false).n_coef() == 3);
}

TEST_CASE("missingness fit") {
  const Dataset complete = oracle::random_dataset(100, 1, 0.0);
  CHECK(complete.r.sum() == 0);
  CHECK_THROWS_AS(fit_missingness(complete, ModelSpec::missingness({}, false)), EmptyClassError);

  // 40 of 100 exposures missing, intercept only.
  std::vector<std::optional<int>> a(100);
  for (int i = 0; i < 100; ++i) {
    if (i % 5 >= 2) a[i] = i % 2;
  }
  const Dataset d = Dataset::from_columns(complete.x.rightCols(3), a, complete.y);
  CHECK(d.r.sum() == 40);
  const NuisanceFit fit = fit_missingness(d, ModelSpec::missingness({}, false));
  CHECK(std::abs(fit.coef(0) - std::log(0.4 / 0.6)) <= 1e-6);
  CHECK((fit.fitted.array() - 0.4).abs().maxCoeff() < 1e-6);
}

TEST_CASE("imputation fit reduces to ordinary logistic regression on complete cases") {
  // All observed, coin flips, intercept only: logit of the sample mean.
  const Dataset coin = oracle::random_dataset(400, 2, 0.0);
  const NuisanceFit flat = fit_imputation(coin, ModelSpec::imputation({}, false));
  const double abar = coin.a.mean();
  CHECK(std::abs(flat.coef(0) - std::log(abar / (1 - abar))) < 1e-8);

  // R == 0: identical to A ~ X + Y.
  const ModelSpec spec = ModelSpec::full(ModelKind::Imputation, 3);
  const NuisanceFit full = fit_imputation(coin, spec);
  CHECK(max_abs(full.coef - plain_fit(design(coin, spec), coin.a, Eigen::VectorXd::Ones(coin.n()))) < 1e-10);

  // With missing rows: same as fitting the complete-case subset, fitted on every row.
  const Dataset d = oracle::random_dataset(400, 3, 0.35);
  std::vector<Index> keep;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.r(i) == 0) keep.push_back(i);
  }
  const Dataset cc = take_rows(d, keep);
  const NuisanceFit on_all = fit_imputation(d, spec);
  const NuisanceFit on_cc = fit_imputation(cc, spec);
  CHECK(max_abs(on_all.coef - on_cc.coef) < 1e-10);
  CHECK(on_all.fitted.size() == d.n());

  std::vector<std::optional<int>> ones(50, 1);
  const Dataset constant = Dataset::from_columns(Eigen::MatrixXd::Random(50, 2), ones, coin.y.head(50));
  CHECK_THROWS_AS(fit_imputation(constant, ModelSpec::imputation({1, 2})), EmptyClassError);
}

TEST_CASE("weighted-likelihood fits reduce to unweighted fits") {
  const Dataset complete = oracle::random_dataset(300, 4, 0.0);
  const NuisanceFit none = constant_missingness(complete, 0.0);
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(complete.n());

  CHECK(max_abs(fit_ps_wla(complete, none, ps).coef - plain_fit(design(complete, ps), complete.a, ones)) < 1e-10);
  CHECK(max_abs(fit_outcome_wla(complete, none, out).coef - plain_fit(design(complete, out), complete.y, ones)) <
        1e-10);

  // Constant P_R: weights are a constant on complete cases.
  const Dataset d = oracle::random_dataset(300, 5, 0.3);
  const Eigen::VectorXd cc = (1.0 - d.r.array()).matrix();
  const NuisanceFit half = constant_missingness(d, 0.5);
  CHECK(max_abs(fit_ps_wla(d, half, ps).coef - plain_fit(design(d, ps), d.a, cc)) < 1e-8);
  CHECK(max_abs(fit_outcome_wla(d, half, out).coef - plain_fit(design(d, out), d.y, cc)) < 1e-8);

  // Doubling every weight 1 / (1 - P_R) leaves the root unchanged.
  NuisanceFit miss = fit_missingness(d, ModelSpec::full(ModelKind::Missingness, 3));
  NuisanceFit doubled = miss;
  doubled.fitted = ((1.0 + miss.fitted.array()) / 2.0).matrix();
  CHECK((missingness_weights(d, doubled.fitted) - 2.0 * missingness_weights(d, miss.fitted)).norm() < 1e-9);
  CHECK(max_abs(fit_outcome_wla(d, miss, out).coef - fit_outcome_wla(d, doubled, out).coef) < 1e-8);
  CHECK(max_abs(fit_ps_wla(d, miss, ps).coef - fit_ps_wla(d, doubled, ps).coef) < 1e-8);
}

TEST_CASE("augmented fits reduce to unweighted fits when nothing is missing") {
  const Dataset complete = oracle::random_dataset(300, 6, 0.0);
  const NuisanceFit none = constant_missingness(complete, 0.0);
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(complete.n());
  // Any imputation vector: its coefficient c_i = (P_R - R) / (1 - P_R) is zero.
  const Eigen::VectorXd pi = Eigen::VectorXd::LinSpaced(complete.n(), 0.1, 0.9);

  const NuisanceFit a_ee = fit_ps_ee(complete, none, pi, ps);
  const NuisanceFit b_ee = fit_outcome_ee(complete, none, pi, out);
  CHECK(max_abs(a_ee.coef - plain_fit(design(complete, ps), complete.a, ones)) < 1e-9);
  CHECK(max_abs(b_ee.coef - plain_fit(design(complete, out), complete.y, ones)) < 1e-9);
  CHECK(max_abs(a_ee.coef - fit_ps_wla(complete, none, ps).coef) < 1e-9);
  CHECK(max_abs(b_ee.coef - fit_outcome_wla(complete, none, out).coef) < 1e-9);
}

TEST_CASE("augmented PS fit has the WLA root as a fixed point") {
  // pi = expit(X alpha_WLA) makes the augmentation vanish at alpha_WLA.
  const Dataset d = oracle::random_dataset(50, 7, 0.3);
  const NuisanceFit half = constant_missingness(d, 0.3);
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const NuisanceFit wla = fit_ps_wla(d, half, ps);
  const Eigen::VectorXd pi = expit(design(d, ps) * wla.coef);
  const NuisanceFit ee = fit_ps_ee(d, half, pi, ps);
  CHECK(max_abs(ee.coef - wla.coef) < 1e-8);
}

TEST_CASE("augmented outcome fit with a degenerate imputation law") {
  // pi_i equal to the true exposure on every row and P_R from the generating
  // model: the weights and augmentation coefficients satisfy w - c = 1 on
  // complete rows and w = 0, c = -1 on incomplete ones, so the equation is the
  // ordinary score of the fully observed data.
  SimulatedDraw draw = generate_draw(DgpConfig::benchmark(50, 31));
  const Dataset& d = draw.data;
  const DgpConfig cfg = DgpConfig::benchmark(50, 31);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  NuisanceFit truth = constant_missingness(d, 0.0);
  truth.fitted = expit(design(d, ModelSpec::full(ModelKind::Missingness, 3)) * cfg.coef_missing);

  const NuisanceFit ee = fit_outcome_ee(d, truth, draw.full_exposure, out);
  const Dataset filled = complete_copy(d, draw.full_exposure);
  const Eigen::VectorXd ml = plain_fit(design(filled, out), filled.y, Eigen::VectorXd::Ones(filled.n()));
  CHECK(max_abs(ee.coef - ml) < 1e-8);

  // On complete rows the observed exposure is what pi reproduces.
  for (Index i = 0; i < d.n(); ++i) {
    if (d.r(i) == 0) CHECK(draw.full_exposure(i) == d.a(i));
  }
}

TEST_CASE("every fit satisfies its own estimating equation") {
  const Dataset d = generate_dataset(DgpConfig::benchmark(800, 12));
  const SolveOptions opts;
  const ModelSpec ms = ModelSpec::full(ModelKind::Missingness, 3);
  const ModelSpec imp = ModelSpec::full(ModelKind::Imputation, 3);
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  const NuisanceFit g = fit_missingness(d, ms);
  const NuisanceFit h = fit_imputation(d, imp);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.n());
  const Eigen::VectorXd cc = (1.0 - d.r.array()).matrix();
  const Eigen::VectorXd w = missingness_weights(d, g.fitted);

  CHECK(max_abs(logistic_score(design(d, ms), d.r, ones, g.coef)) <= opts.tolerance);
  CHECK(max_abs(logistic_score(design(d, imp), d.a, cc, h.coef)) <= opts.tolerance);
  CHECK(max_abs(logistic_score(design(d, ps), d.a, w, fit_ps_wla(d, g, ps).coef)) <= opts.tolerance);
  CHECK(max_abs(logistic_score(design(d, out), d.y, w, fit_outcome_wla(d, g, out).coef)) <= opts.tolerance);
  CHECK(max_abs(ps_ee_score(d, g.fitted, h.fitted, ps, fit_ps_ee(d, g, h, ps).coef)) <= opts.tolerance);
  CHECK(max_abs(outcome_ee_score(d, g.fitted, h.fitted, out, fit_outcome_ee(d, g, h, out).coef)) <=
        opts.tolerance);
}

TEST_CASE("augmented-fit jacobians match central differences") {
  const Dataset d = generate_dataset(DgpConfig::benchmark(300, 13));
  const NuisanceFit g = fit_missingness(d, ModelSpec::full(ModelKind::Missingness, 3));
  const NuisanceFit h = fit_imputation(d, ModelSpec::full(ModelKind::Imputation, 3));
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> norm(0.0, 0.6);
  for (int point = 0; point < 5; ++point) {
    Eigen::VectorXd alpha(4), beta(5);
    for (Index j = 0; j < 4; ++j) alpha(j) = norm(gen);
    for (Index j = 0; j < 5; ++j) beta(j) = norm(gen);
    const Eigen::MatrixXd fd_a = oracle::central_jacobian(
        [&](const Eigen::VectorXd& t) -> Eigen::VectorXd { return ps_ee_score(d, g.fitted, h.fitted, ps, t); },
        alpha);
    const Eigen::MatrixXd fd_b = oracle::central_jacobian(
        [&](const Eigen::VectorXd& t) -> Eigen::VectorXd { return outcome_ee_score(d, g.fitted, h.fitted, out, t); },
        beta);
    CHECK(oracle::relative_error(ps_ee_jacobian(d, g.fitted, ps, alpha), fd_a) <= 1e-5);
    CHECK(oracle::relative_error(outcome_ee_jacobian(d, g.fitted, h.fitted, out, beta), fd_b) <= 1e-5);
  }
}

TEST_CASE("outcome score expectation by enumeration matches Monte Carlo over A") {
  const Dataset d = generate_dataset(DgpConfig::benchmark(200, 14));
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);
  const Eigen::VectorXd pi = Eigen::VectorXd::LinSpaced(d.n(), 0.15, 0.85);
  Eigen::VectorXd beta(5);
  beta << 0.6, 0.4, 0.8, 0.7, 0.9;
  const Eigen::MatrixXd m = outcome_score_expectation(d, pi, out, beta);
  REQUIRE(m.rows() == d.n());
  REQUIRE(m.cols() == 5);

  const Eigen::MatrixXd z1 = design(d, out, 1.0);
  const Eigen::MatrixXd z0 = design(d, out, 0.0);
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u;
  const int draws = 1000000;
  for (const Index row : {3, 41, 77, 120, 199}) {
    const Eigen::VectorXd v1 = z1.row(row).transpose() * (d.y(row) - oracle::sigmoid(z1.row(row).dot(beta)));
    const Eigen::VectorXd v0 = z0.row(row).transpose() * (d.y(row) - oracle::sigmoid(z0.row(row).dot(beta)));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), sum2 = Eigen::VectorXd::Zero(5);
    for (int k = 0; k < draws; ++k) {
      const Eigen::VectorXd& v = u(gen) < pi(row) ? v1 : v0;
      sum += v;
      sum2 += v.cwiseProduct(v);
    }
    const Eigen::VectorXd mean = sum / draws;
    const Eigen::VectorXd var = (sum2 / draws - mean.cwiseProduct(mean)) * draws / (draws - 1.0);
    for (Index j = 0; j < 5; ++j) {
      const double se = std::sqrt(var(j) / draws);
      CHECK(std::abs(m(row, j) - mean(j)) <= 3 * se + 1e-12);
    }
  }
}

TEST_CASE("Bayes reconstruction of the exposure probability") {
  Eigen::VectorXd e(3), p1(3), p0(3), y(3);
  e << 0.5, 0.5, 0.3;
  p1 << 0.8, 0.8, 0.6;
  p0 << 0.2, 0.2, 0.6;
  y << 1, 0, 1;
  const BayesImputation b = bayes_imputation(e, p1, p0, y);
  CHECK(b.prob(0) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(b.prob(1) == doctest::Approx(0.2).epsilon(1e-14));
  // Equal likelihoods: the posterior is the prior.
  CHECK(b.prob(2) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_FALSE(b.clamped);

  // No exposure effect in a fitted outcome model: posterior equals the PS fit.
  const Dataset d = generate_dataset(DgpConfig::benchmark(300, 15));
  NuisanceFit ps;
  ps.spec = ModelSpec::full(ModelKind::PropensityScore, 3);
  ps.fitted = Eigen::VectorXd::LinSpaced(d.n(), 0.05, 0.95);
  NuisanceFit outcome;
  outcome.spec = ModelSpec::full(ModelKind::Outcome, 3);
  outcome.fitted = expit((d.x * Eigen::Vector4d(0.1, 0.5, -0.3, 0.2)).eval());
  outcome.fitted0 = outcome.fitted;
  const BayesImputation flat = bayes_imputation(ps, outcome, d);
  CHECK(max_abs(flat.prob - ps.fitted) < 1e-15);

  // Valid probabilities and row relabeling.
  outcome.fitted = expit((d.x * Eigen::Vector4d(0.9, 0.5, -0.3, 0.2)).eval());
  const BayesImputation post = bayes_imputation(ps, outcome, d);
  CHECK((post.prob.array() >= kProbClamp).all());
  CHECK((post.prob.array() <= 1 - kProbClamp).all());
  std::vector<Index> perm(d.n());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  Eigen::VectorXd e2(d.n()), q1(d.n()), q0(d.n()), y2(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    e2(i) = ps.fitted(perm[i]);
    q1(i) = outcome.fitted(perm[i]);
    q0(i) = outcome.fitted0(perm[i]);
    y2(i) = d.y(perm[i]);
  }
  const BayesImputation shuffled = bayes_imputation(e2, q1, q0, y2);
  for (Index i = 0; i < d.n(); ++i) CHECK(shuffled.prob(i) == post.prob(perm[i]));
}

TEST_CASE("Bayes posterior under the generating law is calibrated") {
  // 10^7 draws of (X, A, Y); posterior from the generating PS and outcome
  // coefficients; empirical frequency of A = 1 within 50 posterior bins.
  const DgpConfig cfg = DgpConfig::benchmark();
  std::mt19937_64 gen(77);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> u;
  const int bins = 50;
  std::vector<double> count(bins, 0.0), exposed(bins, 0.0), predicted(bins, 0.0);
  const Index chunk = 1000000;
  for (int c = 0; c < 10; ++c) {
    Eigen::VectorXd e(chunk), p1(chunk), p0(chunk), y(chunk), a(chunk);
    for (Index i = 0; i < chunk; ++i) {
      const double x1 = norm(gen), x2 = norm(gen), x3 = norm(gen);
      e(i) = oracle::sigmoid(cfg.coef_ps(0) + cfg.coef_ps(1) * x1 + cfg.coef_ps(2) * x2 + cfg.coef_ps(3) * x3);
      const double lin = cfg.coef_outcome(0) + cfg.coef_outcome(1) * x1 + cfg.coef_outcome(2) * x2 +
                         cfg.coef_outcome(3) * x3;
      p1(i) = oracle::sigmoid(lin + cfg.coef_outcome(4));
      p0(i) = oracle::sigmoid(lin);
      a(i) = u(gen) < e(i) ? 1.0 : 0.0;
      y(i) = u(gen) < (a(i) == 1.0 ? p1(i) : p0(i)) ? 1.0 : 0.0;
    }
    const Eigen::VectorXd post = bayes_imputation(e, p1, p0, y).prob;
    for (Index i = 0; i < chunk; ++i) {
      const int b = std::min(bins - 1, static_cast<int>(post(i) * bins));
      count[b] += 1;
      exposed[b] += a(i);
      predicted[b] += post(i);
    }
  }
  int checked = 0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] < 10000) continue;
    ++checked;
    CHECK(std::abs(exposed[b] / count[b] - predicted[b] / count[b]) < 0.01);
  }
  CHECK(checked >= 40);
}

TEST_CASE("nuisance fits at n = 10^6 land on their targets") {
  const DgpConfig cfg = DgpConfig::benchmark(1000000, 5);
  const Dataset d = generate_dataset(cfg);
  const ModelSpec ms = ModelSpec::full(ModelKind::Missingness, 3);
  const ModelSpec ms_wrong = ModelSpec::missingness({1, 2, 3}, false);
  const ModelSpec imp = ModelSpec::full(ModelKind::Imputation, 3);
  const ModelSpec ps = ModelSpec::full(ModelKind::PropensityScore, 3);
  const ModelSpec out = ModelSpec::full(ModelKind::Outcome, 3);

  const NuisanceFit g = fit_missingness(d, ms);
  CHECK(max_abs(g.coef - cfg.coef_missing) < 0.02);
  CHECK(max_abs(fit_ps_wla(d, g, ps).coef - cfg.coef_ps) < 0.02);
  CHECK(max_abs(fit_outcome_wla(d, g, out).coef - cfg.coef_outcome) < 0.02);

  // The imputation model is a logistic projection, not the exact law of A | X, Y.
  const NuisanceFit h = fit_imputation(d, imp);
  const Eigen::VectorXd cc_target =
      oracle::imputation_projection(cfg.coef_ps, cfg.coef_outcome, cfg.coef_missing, true);
  const Eigen::VectorXd full_target =
      oracle::imputation_projection(cfg.coef_ps, cfg.coef_outcome, cfg.coef_missing, false);
  MESSAGE("delta_hat " << h.coef.transpose() << " | complete-case target " << cc_target.transpose()
                       << " | full-data target " << full_target.transpose());
  CHECK(max_abs(h.coef - cc_target) < 0.02);
  CHECK(max_abs(h.coef - full_target) < 0.03);

  // Wrong missingness model, correct imputation model.
  const NuisanceFit g_wrong = fit_missingness(d, ms_wrong);
  CHECK(max_abs(fit_ps_ee(d, g_wrong, h, ps).coef - cfg.coef_ps) < 0.03);
  CHECK(std::abs(fit_outcome_ee(d, g_wrong, h, out).coef(4) - cfg.coef_outcome(4)) < 0.03);
}
