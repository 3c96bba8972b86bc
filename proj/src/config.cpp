#include "misexp/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "misexp/errors.hpp"

namespace misexp {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Simulate: return "simulate";
    case Mode::Estimate: return "estimate";
    case Mode::Bench: return "bench";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  for (const Mode m : {Mode::Simulate, Mode::Estimate, Mode::Bench}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown mode '" + text + "' (expected simulate, estimate or bench)");
}

void RunConfig::validate() const {
  if (mode == Mode::Estimate && !dataset_path) throw ConfigError("estimate mode requires --data");
  if (mode != Mode::Estimate && dataset_path) {
    throw ConfigError(to_string(mode) + " mode does not take a dataset path");
  }
  if (mode == Mode::Estimate) columns.validate();
  if (B < 100 && !(mode == Mode::Bench && B == 0)) throw ConfigError("B must be >= 100 (bench also accepts 0)");
  if (N < 2) throw ConfigError("N must be >= 2");
  if (n < 10) throw ConfigError("n must be >= 10");
  if (m < 2) throw ConfigError("m must be >= 2");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (grid != "ipw" && grid != "tr") throw ConfigError("grid must be 'ipw' or 'tr'");
  if (dgp != "benchmark" && dgp != "covid") throw ConfigError("dgp must be 'benchmark' or 'covid'");
  if (replicates_path && mode != Mode::Bench) throw ConfigError("--replicates-out is a bench option");
  if (!scenarios.empty() && mode != Mode::Bench) throw ConfigError("--scenarios is a bench option");
  for (const auto* sel : {&missingness, &ps, &outcome}) {
    if (sel->covariates == "none") throw ConfigError("only the imputation model may be 'none'");
  }
  if (imputation.covariates == "none") {
    for (const Method method : methods.empty() ? all_methods() : methods) {
      if (uses_imputation(method)) throw ConfigError(to_string(method) + " requires an imputation model");
    }
  }
}

namespace {

std::vector<int> resolve_covariates(const std::string& text, const Dataset& data, const char* model) {
  const Index p = data.p();
  std::vector<int> out;
  if (text == "all") {
    for (int j = 1; j <= p; ++j) out.push_back(j);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), item);
    int idx = 0;
    if (it != data.covariate_names.end()) {
      idx = static_cast<int>(it - data.covariate_names.begin()) + 1;
    } else {
      const auto res = std::from_chars(item.data(), item.data() + item.size(), idx);
      if (res.ec != std::errc() || res.ptr != item.data() + item.size() || idx < 1 || idx > p) {
        throw ConfigError(std::string(model) + " model: unknown covariate '" + item + "'");
      }
    }
    if (std::find(out.begin(), out.end(), idx) != out.end()) {
      throw ConfigError(std::string(model) + " model: covariate '" + item + "' listed twice");
    }
    out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SpecBundle resolve_specs(const RunConfig& cfg, const Dataset& data) {
  SpecBundle b;
  b.missingness = ModelSpec::missingness(resolve_covariates(cfg.missingness.covariates, data, "missingness"),
                                         cfg.missingness.extra_term);
  if (cfg.imputation.covariates != "none") {
    b.imputation = ModelSpec::imputation(resolve_covariates(cfg.imputation.covariates, data, "imputation"),
                                         cfg.imputation.extra_term);
  }
  b.ps = ModelSpec::propensity(resolve_covariates(cfg.ps.covariates, data, "ps"));
  b.outcome = ModelSpec::outcome(resolve_covariates(cfg.outcome.covariates, data, "outcome"));
  b.use_bayes_fallback = cfg.bayes_fallback;
  for (const Method m : cfg.methods.empty() ? all_methods() : cfg.methods) b.validate(data.p(), m);
  return b;
}

}  // namespace misexp
