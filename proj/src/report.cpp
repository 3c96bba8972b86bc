#include "misexp/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "misexp/csv.hpp"
#include "misexp/errors.hpp"

namespace misexp {

namespace {

bool needs_quotes(std::string_view v) {
  return v.empty() || v.find_first_of(" \t\"=\\\n") != std::string_view::npos;
}

std::string quote(std::string_view v) {
  if (!needs_quotes(v)) return std::string(v);
  std::string out = "\"";
  for (const char ch : v) {
    if (ch == '"' || ch == '\\') {
      out.push_back('\\');
      out.push_back(ch);
    } else if (ch == '\n') {
      out += "\\n";
    } else {
      out.push_back(ch);
    }
  }
  out.push_back('"');
  return out;
}

std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace

std::string format_record(const Record& record) {
  std::string line;
  for (const auto& [key, value] : record) {
    if (!line.empty()) line.push_back(' ');
    line += key;
    line.push_back('=');
    line += quote(value);
  }
  return line;
}

std::map<std::string, std::string> parse_record(std::string_view line) {
  std::map<std::string, std::string> out;
  std::size_t i = 0;
  const auto fail = [&](const char* what) {
    throw ParseError(std::string("record: ") + what + " at offset " + std::to_string(i));
  };
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    const std::size_t eq = line.find('=', i);
    if (eq == std::string_view::npos || eq == i) fail("expected key=value");
    std::string key(line.substr(i, eq - i));
    if (key.find(' ') != std::string::npos) fail("space in key");
    i = eq + 1;
    std::string value;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char ch = line[i++];
        if (ch == '"') {
          closed = true;
          break;
        }
        if (ch == '\\') {
          if (i >= line.size()) fail("dangling escape");
          const char esc = line[i++];
          value.push_back(esc == 'n' ? '\n' : esc);
        } else {
          value.push_back(ch);
        }
      }
      if (!closed) fail("unterminated quote");
    } else {
      const std::size_t sp = line.find(' ', i);
      const std::size_t end = sp == std::string_view::npos ? line.size() : sp;
      value = std::string(line.substr(i, end - i));
      i = end;
    }
    if (!out.emplace(std::move(key), std::move(value)).second) fail("duplicate key");
  }
  return out;
}

std::string format_number(double value, int digits) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  // Avoid "-0.000000".
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

const std::vector<std::string>& method_record_fields() {
  static const std::vector<std::string> fields = {
      "record",          "method",          "status",           "tau",
      "tau1",            "tau0",            "ci_lower",         "ci_upper",
      "bse",             "B",               "n_failed",         "clamped_probabilities",
      "clamped_tau",     "extreme_weights", "max_weight",       "solver_iterations",
      "bayes_iterations", "rubin_var_log_tau", "error_kind",     "error",
  };
  return fields;
}

std::string format_analysis_report(const AnalysisReport& report) {
  std::ostringstream out;
  out << format_record({{"schema", kAnalysisSchema}}) << '\n';
  const DatasetSummary& s = report.summary;
  out << format_record({{"record", "dataset"},
                        {"n", std::to_string(s.n)},
                        {"n_missing", std::to_string(s.n_missing)},
                        {"missing_rate", format_number(s.missing_rate)},
                        {"complete_exposed", std::to_string(s.complete_exposed)},
                        {"complete_unexposed", std::to_string(s.complete_unexposed)},
                        {"outcome_rate", format_number(s.outcome_rate)},
                        {"B", std::to_string(report.B)},
                        {"seed", std::to_string(report.seed)}})
      << '\n';
  for (const MethodReport& m : report.methods) {
    const std::string na = "NA";
    const auto num = [&](double v) { return m.ok ? format_number(v) : na; };
    const Diagnostics& d = m.estimate.diagnostics;
    Record r = {
        {"record", "method"},
        {"method", to_string(m.method)},
        {"status", m.ok ? "ok" : "error"},
        {"tau", num(m.estimate.tau)},
        {"tau1", num(m.estimate.tau1)},
        {"tau0", num(m.estimate.tau0)},
        {"ci_lower", num(m.bootstrap.ci_lower)},
        {"ci_upper", num(m.bootstrap.ci_upper)},
        {"bse", num(m.bootstrap.bse)},
        {"B", std::to_string(report.B)},
        {"n_failed", m.ok ? std::to_string(m.bootstrap.n_failed) : na},
        {"clamped_probabilities", m.ok ? flag(d.clamped_probabilities) : na},
        {"clamped_tau", m.ok ? flag(d.clamped_tau) : na},
        {"extreme_weights", m.ok ? flag(d.extreme_weights) : na},
        {"max_weight", num(d.max_weight)},
        {"solver_iterations", m.ok ? std::to_string(d.solver_iterations) : na},
        {"bayes_iterations", m.ok ? std::to_string(d.bayes_iterations) : na},
        {"rubin_var_log_tau", m.ok && d.rubin_variance_log_tau ? format_number(*d.rubin_variance_log_tau) : na},
        {"error_kind", m.ok ? na : m.error_kind},
        {"error", m.ok ? na : m.error_message},
    };
    out << format_record(r) << '\n';
  }
  return out.str();
}

std::string format_error_record(std::string_view kind, std::string_view message, int exit_code) {
  return format_record({{"schema", kErrorSchema},
                        {"kind", std::string(kind)},
                        {"exit_code", std::to_string(exit_code)},
                        {"message", std::string(message)}});
}

std::string format_metrics_table(const MetricsReport& report, const BenchInfo& info) {
  std::ostringstream out;
  out << "# " << format_record({{"schema", kMetricsSchema},
                                {"grid", info.grid},
                                {"true_tau", format_number(report.true_tau)},
                                {"reps", std::to_string(report.reps)},
                                {"B", std::to_string(report.bootstrap_B)},
                                {"n", std::to_string(info.n)},
                                {"seed", std::to_string(info.seed)}})
      << '\n';
  CsvTable table;
  table.header = {"scenario", "method", "reps",       "bias",        "bias_rate",
                  "ese",      "median_bse", "rmse", "ci_coverage", "n_failed_reps"};
  for (const CellMetrics& c : report.cells) {
    table.rows.push_back({c.scenario, to_string(c.method), std::to_string(c.reps), format_number(c.bias),
                          format_number(c.bias_rate), format_number(c.ese), format_number(c.median_bse),
                          format_number(c.rmse), format_number(c.ci_coverage), std::to_string(c.n_failed_reps)});
  }
  write_csv(out, table);
  return out.str();
}

std::string format_replicates_table(const MetricsReport& report) {
  std::ostringstream out;
  CsvTable table;
  table.header = {"scenario", "method", "rep", "ok", "tau", "bse", "ci_lower", "ci_upper"};
  const double nan = std::nan("");
  for (const CellMetrics& c : report.cells) {
    for (std::size_t r = 0; r < c.replications.size(); ++r) {
      const Replication& rep = c.replications[r];
      const bool ci = rep.ok && rep.has_ci;
      table.rows.push_back({c.scenario, to_string(c.method), std::to_string(r), flag(rep.ok),
                            format_number(rep.ok ? rep.tau : nan, 10), format_number(ci ? rep.bse : nan, 10),
                            format_number(ci ? rep.ci_lower : nan, 10), format_number(ci ? rep.ci_upper : nan, 10)});
    }
  }
  write_csv(out, table);
  return out.str();
}

}  // namespace misexp
