#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mest/core.hpp"

namespace mest {

enum class ModelKind { linear, logistic };

/// Rows with `column == value` contribute; the rest are zeroed, so the
/// number of units is unchanged.
struct RowSubset {
  std::string column;
  double value = 0.0;
};

struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  std::string response;
  std::vector<std::string> covariates;
  bool intercept = true;
  std::optional<RowSubset> subset;

  Index n_coef() const noexcept {
    return static_cast<Index>(covariates.size()) + (intercept ? 1 : 0);
  }
};

/// Exchangeable-correlation GEE with fixed nuisance parameters. The model
/// kind picks the family: linear -> gaussian/identity, logistic ->
/// binomial/logit.
struct GeeConfig {
  ModelSpec model;
  double alpha = 0.0;
  double phi = 1.0;
};

/// psi = Y - theta.
EstimatorSpec mean_spec(const std::string& y_col);

/// psi = (Y - t1, (Y - t1)^2 - t2): mean and m-divisor variance.
EstimatorSpec moments_spec(const std::string& y_col);

/// psi = (Y1 - t1, Y2 - t2, t1 - t3 t2): t3 is the ratio of means.
EstimatorSpec ratio_spec(const std::string& y1_col, const std::string& y2_col);

/// moments plus sqrt(t2) - t3 and log(t2) - t4. Non-positive t2 yields NaN.
EstimatorSpec delta_spec(const std::string& y_col);

/// Per-row least-squares score x (y - x'theta).
EstimatorSpec linear_score_spec(const ModelSpec& model);

/// Per-row logistic score x (y - expit(x'theta)). Response must be 0/1.
EstimatorSpec logistic_score_spec(const ModelSpec& model);

/// Score for the model kind (linear or logistic).
EstimatorSpec score_spec(const ModelSpec& model);

/// Exchangeable working correlation: ones on the diagonal, alpha elsewhere.
Matrix exchangeable_correlation(Index n, double alpha);

/// Cluster psi D_i' V_i^{-1} (Y_i - mu_i), V_i = phi W^{1/2} R(alpha) W^{1/2}.
/// Throws ConfigError (at check/build time) when R(alpha) is not positive
/// definite for some cluster size in the data.
EstimatorSpec gee_spec(const GeeConfig& cfg);

struct DoublyRobustLayout {
  IndexRange propensity;
  IndexRange outcome0;
  IndexRange outcome1;
  /// Position of the causal contrast (last parameter).
  Index delta = 0;
  Index p = 0;
};

DoublyRobustLayout doubly_robust_layout(const ModelSpec& propensity, const ModelSpec& outcome0,
                                        const ModelSpec& outcome1);

/// Stacked system: logistic propensity score, linear outcome scores masked to
/// Z = 0 and Z = 1, and rd_hat - delta where
/// rd_hat = (Z Y - (Z - e) m1) / e - ((1 - Z) Y - (Z - e) m0) / (1 - e).
/// Z is the propensity response, Y the outcome response. Outcome subsets
/// default to Z = 0 / Z = 1 when not given.
EstimatorSpec doubly_robust_spec(const ModelSpec& propensity, const ModelSpec& outcome0,
                                 const ModelSpec& outcome1);

}  // namespace mest
