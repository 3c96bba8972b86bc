#pragma once

// Line-oriented key=value reports. Each record is one line of space separated
// key=value pairs; values containing spaces, quotes, '=' or backslashes are
// double-quoted with backslash escapes. The first line of every report names
// its schema.

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/estimators.hpp"
#include "misexp/inference.hpp"
#include "misexp/simulation.hpp"

namespace misexp {

inline constexpr const char* kAnalysisSchema = "misexp.analysis/1";
inline constexpr const char* kMetricsSchema = "misexp.metrics/1";
inline constexpr const char* kErrorSchema = "misexp.error/1";

using Record = std::vector<std::pair<std::string, std::string>>;

std::string format_record(const Record& record);
/// Inverse of format_record. Throws ParseError on malformed input.
std::map<std::string, std::string> parse_record(std::string_view line);

/// Fixed-format number: "%.*f" with the given digits, "NA" for NaN.
std::string format_number(double value, int digits = 6);

struct MethodReport {
  Method method = Method::IpwIpw;
  bool ok = false;
  EffectEstimate estimate;
  BootstrapResult bootstrap;
  std::string error_kind;
  std::string error_message;
};

struct AnalysisReport {
  DatasetSummary summary;
  int B = 0;
  std::uint64_t seed = 0;
  std::vector<MethodReport> methods;
};

/// Field names of a method record, in output order. Identical for every
/// method and every outcome (failed methods print NA values).
const std::vector<std::string>& method_record_fields();

std::string format_analysis_report(const AnalysisReport& report);

/// Machine-parsable error record for a failed run.
std::string format_error_record(std::string_view kind, std::string_view message, int exit_code);

struct BenchInfo {
  std::string grid;
  Index n = 0;
  std::uint64_t seed = 0;
};

/// "# schema=..." header line, then CSV with columns scenario, method, reps,
/// bias, bias_rate, ese, median_bse, rmse, ci_coverage, n_failed_reps.
std::string format_metrics_table(const MetricsReport& report, const BenchInfo& info);

/// Per-replication estimates: scenario, method, rep, ok, tau, bse, ci_lower, ci_upper.
std::string format_replicates_table(const MetricsReport& report);

}  // namespace misexp
