#include "misexp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <thread>

#include "misexp/errors.hpp"
#include "misexp/glm.hpp"
#include "misexp/inference.hpp"
#include "misexp/random.hpp"

namespace misexp {

DgpConfig DgpConfig::benchmark(Index n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.coef_ps = (Eigen::VectorXd(4) << -0.2, 0.9, 1.0, 0.8).finished();
  cfg.coef_outcome = (Eigen::VectorXd(5) << 0.7, 0.5, 0.9, 0.7, 1.0).finished();
  cfg.coef_missing = (Eigen::VectorXd(5) << -0.5, 0.6, 0.7, 0.8, 0.5).finished();
  return cfg;
}

void DgpConfig::validate() const {
  if (n < 1) throw ConfigError("DgpConfig: n must be >= 1");
  if (coef_ps.size() != 4) throw ConfigError("DgpConfig: coef_ps needs 4 entries");
  if (coef_outcome.size() != 5) throw ConfigError("DgpConfig: coef_outcome needs 5 entries");
  if (coef_missing.size() != 5) throw ConfigError("DgpConfig: coef_missing needs 5 entries");
  if (!coef_ps.allFinite() || !coef_outcome.allFinite() || !coef_missing.allFinite()) {
    throw ConfigError("DgpConfig: coefficients must be finite");
  }
}

SimulatedDraw generate_draw(const DgpConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n;
  CounterRng rng(cfg.seed);
  std::normal_distribution<double> normal;

  SimulatedDraw draw;
  Dataset& d = draw.data;
  d.x.resize(n, 4);
  d.a.resize(n);
  d.y.resize(n);
  d.r.resize(n);
  d.covariate_names = {"x1", "x2", "x3"};
  draw.full_exposure.resize(n);

  const auto& ga = cfg.coef_ps;
  const auto& gb = cfg.coef_outcome;
  const auto& gr = cfg.coef_missing;
  for (Index i = 0; i < n; ++i) {
    const double x1 = normal(rng);
    const double x2 = normal(rng);
    const double x3 = normal(rng);
    const double a = rng.bernoulli(expit(ga(0) + ga(1) * x1 + ga(2) * x2 + ga(3) * x3)) ? 1.0 : 0.0;
    const double y = rng.bernoulli(expit(gb(0) + gb(1) * x1 + gb(2) * x2 + gb(3) * x3 + gb(4) * a)) ? 1.0 : 0.0;
    const double r = rng.bernoulli(expit(gr(0) + gr(1) * x1 + gr(2) * x2 + gr(3) * x3 + gr(4) * y)) ? 1.0 : 0.0;
    d.x.row(i) << 1.0, x1, x2, x3;
    d.y(i) = y;
    d.r(i) = r;
    d.a(i) = r == 1.0 ? 0.0 : a;
    draw.full_exposure(i) = a;
  }
  return draw;
}

Dataset generate_dataset(const DgpConfig& cfg) { return generate_draw(cfg).data; }

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw ConfigError("gauss_hermite: order must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

std::pair<double, double> true_arm_means(const Eigen::VectorXd& coef_outcome, int order) {
  if (coef_outcome.size() < 2) throw ConfigError("true_arm_means: need intercept and exposure coefficients");
  if (order < 20) throw ConfigError("true_arm_means: quadrature order must be >= 20");
  const Index p = coef_outcome.size() - 2;
  const double b0 = coef_outcome(0);
  const double ba = coef_outcome(p + 1);
  const double scale = coef_outcome.segment(1, p).norm();
  const QuadratureRule rule = gauss_hermite(order);
  double t1 = 0.0;
  double t0 = 0.0;
  for (Index k = 0; k < rule.nodes.size(); ++k) {
    const double eta = b0 + scale * rule.nodes(k);
    t1 += rule.weights(k) * expit(eta + ba);
    t0 += rule.weights(k) * expit(eta);
  }
  return {t1, t0};
}

double true_tau(const Eigen::VectorXd& coef_outcome, int order) {
  const auto [t1, t0] = true_arm_means(coef_outcome, order);
  return odds_ratio(t1, t0);
}

// ---------------------------------------------------------------------------

namespace {

std::string scenario_label(std::initializer_list<std::pair<bool, const char*>> groups) {
  std::string ok;
  std::string bad;
  for (const auto& [correct, name] : groups) {
    std::string& dst = correct ? ok : bad;
    if (!dst.empty()) dst += ' ';
    dst += name;
  }
  if (bad.empty()) return "All True";
  if (ok.empty()) return "All False";
  return ok + " ok / " + bad + " wrong";
}

}  // namespace

Scenario make_scenario(bool ms_ok, bool imp_ok, bool ps_ok, bool or_ok) {
  const std::vector<int> all = {1, 2, 3};
  const std::vector<int> no_x3 = {1, 2};
  Scenario s;
  s.ms_ok = ms_ok;
  s.imp_ok = imp_ok;
  s.ps_ok = ps_ok;
  s.or_ok = or_ok;
  s.specs.missingness = ModelSpec::missingness(all, ms_ok);
  s.specs.imputation = ModelSpec::imputation(all, imp_ok);
  s.specs.ps = ModelSpec::propensity(ps_ok ? all : no_x3);
  s.specs.outcome = ModelSpec::outcome(or_ok ? all : no_x3);
  s.specs.use_bayes_fallback = !ms_ok && !imp_ok;

  s.label = scenario_label({{ms_ok, "MS"}, {ps_ok, "PS"}, {or_ok, "OR"}, {imp_ok, "Imp"}});
  return s;
}

namespace {

Scenario ipw_scenario(bool ms, bool ps, bool out) {
  Scenario s = make_scenario(ms, true, ps, out);
  s.label = scenario_label({{ms, "MS"}, {ps, "PS"}, {out, "OR"}});
  s.specs.use_bayes_fallback = false;
  return s;
}

}  // namespace

std::vector<Scenario> ipw_scenarios() {
  return {
      ipw_scenario(true, true, true),   ipw_scenario(true, true, false),  ipw_scenario(true, false, true),
      ipw_scenario(false, true, true),  ipw_scenario(true, false, false), ipw_scenario(false, true, false),
      ipw_scenario(false, false, true), ipw_scenario(false, false, false),
  };
}

std::vector<Scenario> tr_scenarios() {
  // (ms, imp, ps, or) in table order.
  static const bool rows[16][4] = {
      {true, true, true, true},     {true, false, true, true},   {true, true, true, false},
      {true, true, false, true},    {false, true, true, true},   {true, false, true, false},
      {true, false, false, true},   {true, true, false, false},  {false, false, true, true},
      {false, true, true, false},   {false, true, false, true},  {true, false, false, false},
      {false, false, true, false},  {false, false, false, true}, {false, true, false, false},
      {false, false, false, false},
  };
  std::vector<Scenario> out;
  for (const auto& r : rows) out.push_back(make_scenario(r[0], r[1], r[2], r[3]));
  return out;
}

ScenarioGrid ScenarioGrid::ipw() {
  ScenarioGrid g;
  g.scenarios = ipw_scenarios();
  g.methods = {Method::IpwIpw, Method::IpwDr, Method::IpwWee};
  return g;
}

ScenarioGrid ScenarioGrid::tr() {
  ScenarioGrid g;
  g.scenarios = tr_scenarios();
  g.methods = {Method::DrSi, Method::DrMice, Method::TrAipw, Method::TrWee};
  return g;
}

void ScenarioGrid::validate() const {
  if (scenarios.empty() || methods.empty()) throw ConfigError("scenario grid is empty");
  if (reps < 2) throw ConfigError("scenario grid needs at least 2 replications");
  if (bootstrap_B != 0 && bootstrap_B < 100) throw ConfigError("bootstrap_B must be 0 or >= 100");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  std::set<std::string> labels;
  for (const auto& s : scenarios) {
    if (!labels.insert(s.label).second) throw ConfigError("duplicate scenario label '" + s.label + "'");
    for (const Method m : methods) s.specs.validate(3, m);
  }
}

// ---------------------------------------------------------------------------

CellMetrics compute_metrics(std::string scenario, Method method, std::vector<Replication> replications,
                            double true_tau) {
  CellMetrics c;
  c.scenario = std::move(scenario);
  c.method = method;
  c.reps = static_cast<int>(replications.size());

  std::vector<double> taus;
  std::vector<double> bses;
  int with_ci = 0;
  int covered = 0;
  for (const auto& r : replications) {
    if (!r.ok) {
      ++c.n_failed_reps;
      continue;
    }
    taus.push_back(r.tau);
    if (r.has_ci) {
      bses.push_back(r.bse);
      ++with_ci;
      covered += (r.ci_lower <= true_tau && true_tau <= r.ci_upper) ? 1 : 0;
    }
  }
  c.replications = std::move(replications);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto n = static_cast<double>(taus.size());
  if (taus.size() < 2) {
    c.bias = c.bias_rate = c.ese = c.rmse = c.median_bse = c.ci_coverage = nan;
    return c;
  }
  double mean = 0.0;
  for (const double t : taus) mean += t;
  mean /= n;
  double ss = 0.0;
  double sq_err = 0.0;
  for (const double t : taus) {
    ss += (t - mean) * (t - mean);
    sq_err += (t - true_tau) * (t - true_tau);
  }
  c.bias = mean - true_tau;
  c.bias_rate = 100.0 * c.bias / true_tau;
  c.ese = std::sqrt(ss / (n - 1.0));
  c.rmse = std::sqrt(sq_err / (n - 1.0));
  if (bses.empty()) {
    c.median_bse = nan;
    c.ci_coverage = nan;
  } else {
    std::sort(bses.begin(), bses.end());
    c.median_bse = quantile_type7(bses, 0.5);
    c.ci_coverage = 100.0 * covered / with_ci;
  }
  return c;
}

const CellMetrics& MetricsReport::cell(const std::string& scenario, Method method) const {
  for (const auto& c : cells) {
    if (c.scenario == scenario && c.method == method) return c;
  }
  throw ConfigError("no metrics cell for '" + scenario + "' / " + to_string(method));
}

MetricsReport run_scenario_grid(const DgpConfig& cfg, const ScenarioGrid& grid) {
  cfg.validate();
  grid.validate();
  const std::size_t n_scen = grid.scenarios.size();
  const std::size_t n_meth = grid.methods.size();
  const auto reps = static_cast<std::size_t>(grid.reps);

  // results[cell][rep], cell = scenario * n_meth + method.
  std::vector<std::vector<Replication>> results(n_scen * n_meth, std::vector<Replication>(reps));

  const auto run_rep = [&](std::size_t r) {
    const auto rep = static_cast<std::uint64_t>(r);
    DgpConfig dc = cfg;
    dc.seed = derive_seed(grid.seed, {0, rep});
    const Dataset data = generate_dataset(dc);
    const std::uint64_t boot_seed = derive_seed(grid.seed, {1, rep});
    EstimatorOptions eo = grid.estimator;
    eo.seed = derive_seed(grid.seed, {2, rep});

    for (std::size_t s = 0; s < n_scen; ++s) {
      const SpecBundle& specs = grid.scenarios[s].specs;
      for (std::size_t m = 0; m < n_meth; ++m) {
        Replication out;
        try {
          const EffectEstimate est = estimate(grid.methods[m], data, specs, eo);
          out.tau = est.tau;
          if (grid.bootstrap_B > 0) {
            const BootstrapResult boot = bootstrap(data, specs, grid.methods[m], grid.bootstrap_B, boot_seed, eo);
            out.bse = boot.bse;
            out.ci_lower = boot.ci_lower;
            out.ci_upper = boot.ci_upper;
            out.has_ci = true;
          }
          out.ok = std::isfinite(out.tau);
        } catch (const NumericalError&) {
          out = Replication{};
        }
        results[s * n_meth + m][r] = out;
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(grid.threads, 1, grid.reps));
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) run_rep(r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t r = t; r < reps; r += workers) run_rep(r);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  MetricsReport report;
  report.true_tau = true_tau(cfg.coef_outcome);
  report.reps = grid.reps;
  report.bootstrap_B = grid.bootstrap_B;
  for (std::size_t s = 0; s < n_scen; ++s) {
    for (std::size_t m = 0; m < n_meth; ++m) {
      CellMetrics c = compute_metrics(grid.scenarios[s].label, grid.methods[m], std::move(results[s * n_meth + m]),
                                      report.true_tau);
      c.flagged = 5 * c.n_failed_reps > c.reps;
      if (c.flagged && !grid.tolerate_failed_cells) {
        throw NumericalError("cell '" + c.scenario + "' / " + to_string(c.method) + ": " +
                             std::to_string(c.n_failed_reps) + " of " + std::to_string(c.reps) +
                             " replications failed");
      }
      report.cells.push_back(std::move(c));
    }
  }
  return report;
}

}  // namespace misexp
