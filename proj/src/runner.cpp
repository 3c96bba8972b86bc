#include "misexp/runner.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "misexp/errors.hpp"
#include "misexp/random.hpp"

namespace misexp {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return kExitData;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return kExitNumerical;
  if (dynamic_cast<const CLI::Error*>(&e) != nullptr) return kExitConfig;
  return kExitConfig;
}

AnalysisReport run_estimate(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::Estimate) throw ConfigError("run_estimate needs estimate mode");
  const Dataset data = load_csv(*cfg.dataset_path, cfg.columns);
  const SpecBundle specs = resolve_specs(cfg, data);

  AnalysisReport report;
  report.summary = summarize(data);
  report.B = cfg.B;
  report.seed = cfg.seed;

  EstimatorOptions eo;
  eo.mice_imputations = cfg.m;
  eo.seed = derive_seed(cfg.seed, {0});
  BootstrapOptions bo;
  bo.threads = cfg.threads;
  const std::uint64_t boot_seed = derive_seed(cfg.seed, {1});

  for (const Method method : cfg.methods.empty() ? all_methods() : cfg.methods) {
    MethodReport mr;
    mr.method = method;
    try {
      mr.estimate = estimate(method, data, specs, eo);
      mr.bootstrap = bootstrap(data, specs, method, cfg.B, boot_seed, eo, bo);
      mr.ok = true;
    } catch (const Error& e) {
      mr.ok = false;
      mr.error_kind = e.kind();
      mr.error_message = e.what();
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

MetricsReport run_bench(const RunConfig& cfg) {
  cfg.validate();
  ScenarioGrid grid = cfg.grid == "tr" ? ScenarioGrid::tr() : ScenarioGrid::ipw();
  if (!cfg.methods.empty()) grid.methods = cfg.methods;
  if (!cfg.scenarios.empty()) {
    std::vector<Scenario> keep;
    for (const auto& label : cfg.scenarios) {
      const auto it = std::find_if(grid.scenarios.begin(), grid.scenarios.end(),
                                   [&](const Scenario& s) { return s.label == label; });
      if (it == grid.scenarios.end()) throw ConfigError("unknown scenario '" + label + "' for grid " + cfg.grid);
      keep.push_back(*it);
    }
    grid.scenarios = std::move(keep);
  }
  grid.reps = cfg.N;
  grid.bootstrap_B = cfg.B;
  grid.seed = cfg.seed;
  grid.threads = cfg.threads;
  grid.estimator.mice_imputations = cfg.m;
  return run_scenario_grid(DgpConfig::benchmark(cfg.n), grid);
}

CsvTable run_simulate(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.dgp == "covid") return synthetic_covid_table(cfg.seed);
  const Dataset data = generate_dataset(DgpConfig::benchmark(cfg.n, cfg.seed));
  std::ostringstream text;
  write_dataset_csv(text, data, cfg.columns);
  return parse_csv(text.str());
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (!cfg.output_path) {
    out << text;
    return;
  }
  std::ofstream f(*cfg.output_path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + *cfg.output_path + "'");
  f << text;
  if (!f) throw ConfigError("error writing '" + *cfg.output_path + "'");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"misexp: causal odds ratio for a binary exposure missing at random"};
  app.set_config("--config", "", "key=value configuration file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig cfg;
  std::string mode = "estimate";
  std::string data_path;
  std::string covariates;
  std::vector<std::string> markers;
  std::string methods;
  std::string scenarios;
  std::string out_path;
  std::string replicates_path;

  app.add_option("--mode", mode, "simulate, estimate or bench")->check(CLI::IsMember({"simulate", "estimate", "bench"}));
  app.add_option("--data", data_path, "input CSV (estimate mode)");
  app.add_option("--exposure-col", cfg.columns.exposure, "exposure column name")->capture_default_str();
  app.add_option("--outcome-col", cfg.columns.outcome, "outcome column name")->capture_default_str();
  app.add_option("--covariates", covariates, "comma-separated covariate columns (default: all others)");
  app.add_option("--missing-marker", markers, "exposure missing marker, repeatable (default: NA and empty)");
  app.add_option("--method", methods, "comma-separated methods (default: all, or the grid's own)");
  app.add_option("--ms", cfg.missingness.covariates, "missingness model covariates: all or a list")->capture_default_str();
  app.add_flag("!--ms-no-y", cfg.missingness.extra_term, "leave Y out of the missingness model");
  app.add_option("--imp", cfg.imputation.covariates, "imputation model covariates: all, none or a list")
      ->capture_default_str();
  app.add_flag("!--imp-no-y", cfg.imputation.extra_term, "leave Y out of the imputation model");
  app.add_option("--ps", cfg.ps.covariates, "propensity model covariates: all or a list")->capture_default_str();
  app.add_option("--or", cfg.outcome.covariates, "outcome model covariates: all or a list")->capture_default_str();
  app.add_flag("--bayes-fallback", cfg.bayes_fallback, "rebuild P(A=1|X,Y) from the PS and outcome fits");
  app.add_option("--B", cfg.B, "bootstrap replicates")->capture_default_str();
  app.add_option("--N", cfg.N, "simulation replications (bench)")->capture_default_str();
  app.add_option("--n", cfg.n, "simulated sample size")->capture_default_str();
  app.add_option("--m", cfg.m, "DR-MICE imputations")->capture_default_str();
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads for replication fan-out")->capture_default_str();
  app.add_option("--grid", cfg.grid, "bench grid: ipw or tr")->capture_default_str();
  app.add_option("--scenarios", scenarios, "bench: comma-separated scenario labels (default: whole grid)");
  app.add_option("--dgp", cfg.dgp, "simulate: benchmark or covid")->capture_default_str();
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_option("--replicates-out", replicates_path, "bench: per-replication estimates CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::Error& e) {
    err << format_error_record("UsageError", e.what(), kExitConfig) << '\n';
    return kExitConfig;
  }

  try {
    cfg.mode = parse_mode(mode);
    if (!data_path.empty()) cfg.dataset_path = data_path;
    if (!out_path.empty()) cfg.output_path = out_path;
    if (!replicates_path.empty()) cfg.replicates_path = replicates_path;
    if (!covariates.empty()) cfg.columns.covariates = split_list(covariates);
    if (!markers.empty()) cfg.columns.missing_markers = markers;
    cfg.scenarios = split_list(scenarios);
    for (const auto& tag : split_list(methods)) cfg.methods.push_back(parse_method(tag));
    cfg.validate();

    switch (cfg.mode) {
      case Mode::Estimate: {
        const AnalysisReport report = run_estimate(cfg);
        emit(cfg, format_analysis_report(report), out);
        bool any_ok = false;
        for (const auto& m : report.methods) any_ok = any_ok || m.ok;
        return any_ok ? kExitOk : kExitNumerical;
      }
      case Mode::Bench: {
        const MetricsReport report = run_bench(cfg);
        emit(cfg, format_metrics_table(report, {cfg.grid, cfg.n, cfg.seed}), out);
        if (cfg.replicates_path) write_file(*cfg.replicates_path, format_replicates_table(report));
        return kExitOk;
      }
      case Mode::Simulate: {
        std::ostringstream text;
        write_csv(text, run_simulate(cfg));
        emit(cfg, text.str(), out);
        return kExitOk;
      }
    }
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    err << format_error_record(e.kind(), e.what(), code) << '\n';
    return code;
  } catch (const std::exception& e) {
    err << format_error_record("Error", e.what(), kExitConfig) << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace misexp
