#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mest/corrections.hpp"
#include "mest/core.hpp"
#include "mest/numderiv.hpp"
#include "mest/sandwich.hpp"

namespace mest::cli {

/// Bad command line, unknown estimator or correction, missing argument.
class UsageError : public Error {
  using Error::Error;
};

/// Estimator arguments by key (y, y1, y2, response, covariates, intercept,
/// family, alpha, phi, treatment, outcome, ps_covariates,
/// outcome_covariates). List values are comma separated.
using EstimatorArgs = std::map<std::string, std::string, std::less<>>;

std::vector<std::string> estimator_names();
EstimatorSpec make_estimator(const std::string& name, const EstimatorArgs& args);

/// Correction kinds addressable from the command line.
std::vector<std::string> correction_kinds();
/// Parses `name:key=value[,key=value...]`. The kind is the name itself or
/// the longest kind that prefixes it followed by '_' (fay_bias_3 -> fay_bias).
CorrectionSpec parse_correction(const std::string& text);

struct RunRequest {
  std::string estimator;
  EstimatorArgs estimator_args;
  std::string data_path;
  std::optional<std::string> unit_col;
  /// Newton start; zeros of length p when neither start nor roots is given.
  std::optional<std::vector<double>> start;
  /// Fixed roots: skip solving.
  std::optional<std::vector<double>> roots;
  std::vector<std::string> corrections;
  double abs_tol = 1e-10;
  int max_iter = 100;
  DerivControl deriv;
};

using JsonMatrix = std::vector<std::vector<double>>;

struct RunDiagnostics {
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  std::size_t m = 0;
  std::size_t p = 0;

  bool operator==(const RunDiagnostics&) const = default;
};

struct RunReport {
  std::vector<double> estimates;
  /// Empty when the covariance could not be formed.
  JsonMatrix vcov;
  /// In request order; an empty matrix marks a failed correction.
  std::vector<std::pair<std::string, JsonMatrix>> corrections;
  RunDiagnostics diagnostics;

  bool operator==(const RunReport&) const = default;
};

nlohmann::ordered_json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::ordered_json& j);

/// Report for a finished estimation.
RunReport make_report(const MEstimationResult& result);

struct EstimateOutcome {
  /// 0 converged, 1 usage or input error, 2 non-convergence.
  int exit_code = 0;
  /// Present for exit codes 0 and 2.
  std::optional<RunReport> report;
  /// Human diagnostics destined for stderr.
  std::vector<std::string> messages;
};

EstimateOutcome cmd_estimate(const RunRequest& request);

struct SimulateRequest {
  std::string kind;  // geexex or lunceford
  std::size_t size = 100;
  std::uint64_t seed = 1;
  std::vector<double> beta{0.0, 0.6, -0.6, 0.6};
  std::vector<double> nu{0.0, -1.0, 1.0, -1.0, 2.0};
  std::vector<double> xi{-1.0, 1.0, 1.0};
};

Dataset cmd_simulate(const SimulateRequest& request);

/// Full command-line entry point; JSON/CSV go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mest::cli
