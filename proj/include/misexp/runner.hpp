#pragma once

#include <exception>
#include <iosfwd>
#include <string>

#include "misexp/config.hpp"
#include "misexp/csv.hpp"
#include "misexp/report.hpp"
#include "misexp/simulation.hpp"

namespace misexp {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// 1 for configuration errors, 2 for data errors, 3 for numerical failures.
int exit_code_for(const std::exception& e);

/// Loads the dataset and runs every requested method with bootstrap
/// inference. A method that fails is reported with status=error and does not
/// stop the others.
AnalysisReport run_estimate(const RunConfig& cfg);

/// Runs the IPW or TR scenario grid on the benchmark data-generating process.
MetricsReport run_bench(const RunConfig& cfg);

/// Simulated dataset as a CSV table (benchmark DGP or the synthetic COVID
/// shape).
CsvTable run_simulate(const RunConfig& cfg);

/// Full command line: parses flags (and an optional --config key=value file),
/// runs the mode, writes the result to --out or `out`. Errors go to `err` as a
/// single error record; the return value is the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace misexp
