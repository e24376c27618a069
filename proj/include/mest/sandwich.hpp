#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mest/core.hpp"
#include "mest/corrections.hpp"
#include "mest/numderiv.hpp"
#include "mest/rootfind.hpp"

namespace mest {

/// Threshold on the 2-norm condition number of the bread.
inline constexpr double kMaxBreadCondition = 1e12;

struct ComponentDiagnostics {
  /// Units whose A_i needed a one-sided difference somewhere.
  std::vector<std::size_t> one_sided_units;
};

SandwichComponents compute_components(std::span<const UnitPsi> psis, const Vector& theta_hat,
                                      const DerivControl& ctrl = {},
                                      ComponentDiagnostics* diagnostics = nullptr);
SandwichComponents compute_components(const EstimatorSpec& spec, const UnitPartition& partition,
                                      const Vector& theta_hat, const DerivControl& ctrl = {});

/// A^{-1} B A^{-T} with A, B in the sum convention, symmetrized on return.
/// Equal to the mean-convention form Abar^{-1} Bbar Abar^{-T} / m.
/// Throws SingularityError when cond(A) exceeds kMaxBreadCondition.
/// Raw asymmetry above 1e-8 (relative to the largest entry) is reported
/// through `warnings` when given.
Matrix compute_sigma(const Matrix& A, const Matrix& B,
                     std::vector<std::string>* warnings = nullptr);

struct FixedRoots {
  Vector theta;
};

using RootSpec = std::variant<RootControl, FixedRoots>;

struct EstimationDiagnostics {
  /// False when the roots were supplied by the caller.
  bool solved = false;
  RootResult root;
  DerivControl deriv;
  std::vector<std::size_t> one_sided_units;
  std::vector<std::string> warnings;
  std::size_t m = 0;
  Index p = 0;
};

struct MEstimationResult {
  ParameterVector theta_hat;
  Matrix sigma_hat;
  SandwichComponents components;
  CorrectionResults corrections;
  EstimationDiagnostics diagnostics;
};

/// Full pipeline: solve (or take fixed roots), assemble the sandwich
/// components, compute Sigma-hat and run every correction. Errors keep
/// their type and get stage() set to "check", "build", "rootfind",
/// "components" or "sigma".
MEstimationResult m_estimate(const EstimatorSpec& spec, const UnitPartition& partition,
                             const RootSpec& roots, const DerivControl& deriv = {},
                             const std::vector<CorrectionSpec>& corrections = {});

}  // namespace mest
