#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mest/core.hpp"

namespace mest {

/// Everything the sandwich is built from, evaluated at theta-hat.
/// A and B are sums over units, accumulated in unit order.
struct SandwichComponents {
  Matrix A;
  std::vector<Matrix> A_list;
  Matrix B;
  std::vector<Matrix> B_list;
  std::vector<Vector> ee_list;

  std::size_t m() const noexcept { return ee_list.size(); }
  Index p() const noexcept { return A.rows(); }
};

using CorrectionFn = std::function<Matrix(const SandwichComponents&, const Args&)>;

struct CorrectionSpec {
  std::string name;
  CorrectionFn apply;
  Args args;
};

struct CorrectionOutcome {
  std::string name;
  std::optional<Matrix> value;
  /// Set when the correction threw; value is empty then.
  std::string error;
};

/// Correction outputs in the order the corrections were requested.
class CorrectionResults {
 public:
  CorrectionResults() = default;
  explicit CorrectionResults(std::vector<CorrectionOutcome> outcomes)
      : outcomes_(std::move(outcomes)) {}

  const std::vector<CorrectionOutcome>& outcomes() const noexcept { return outcomes_; }
  std::size_t size() const noexcept { return outcomes_.size(); }
  bool empty() const noexcept { return outcomes_.empty(); }
  const CorrectionOutcome* find(std::string_view name) const;
  /// Throws CorrectionError when the name is unknown or that correction failed.
  const Matrix& at(std::string_view name) const;

 private:
  std::vector<CorrectionOutcome> outcomes_;
};

using WeightFn = std::function<double(std::size_t i, std::size_t j, const Args& args)>;

/// Pairwise weights: a vector indexed by |i - j|, or a function of (i, j).
class WeightRule {
 public:
  static WeightRule fixed(std::vector<double> by_distance);
  static WeightRule function(WeightFn fn, Args args = {});

  /// Throws CorrectionError on a non-finite weight or an uncovered distance.
  double operator()(std::size_t i, std::size_t j) const;

 private:
  WeightRule() = default;
  std::variant<std::vector<double>, WeightFn> rule_;
  Args args_;
};

/// Small-sample bias correction. With Abar = A / m,
/// H_i = diag((1 - min(b, (A_i Abar^{-1})_jj))^{-1/2}) and the corrected
/// meat is sum_i H_i B_i H_i^T. Requires 0 < b < 1.
Matrix fay_bias_correction(const SandwichComponents& components, double b);

/// B_AC = sum_{i,j} w(i, j) ee_i ee_j^T over unit indices (0-based),
/// accumulated with i outer and j inner. Zero weights contribute nothing.
Matrix pairwise_weighted_meat(std::span<const Vector> ee_list, const WeightRule& rule);

/// 1 - |i - j| / (lag + 1) inside the lag window, 0 outside.
double newey_west_weight(std::size_t i, std::size_t j, std::int64_t lag);

/// compute_sigma(A, B_AC) with Newey-West weights, no pre-whitening.
Matrix newey_west_correction(const SandwichComponents& components, std::int64_t lag);

CorrectionSpec fay_bias(std::string name, double b);
CorrectionSpec newey_west(std::string name, std::int64_t lag);
/// Returns the uncorrected Sigma-hat.
CorrectionSpec identity_correction(std::string name);

/// Evaluates each correction on the same components. A failure is recorded
/// under its name and does not stop the others. Duplicate names throw
/// ArgumentError before anything runs.
CorrectionResults apply_corrections(const SandwichComponents& components,
                                    const std::vector<CorrectionSpec>& specs);

}  // namespace mest
