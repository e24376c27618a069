#pragma once

#include <functional>
#include <vector>

#include "mest/core.hpp"

namespace mest {

enum class DerivMethod { central, richardson };

/// Per-coordinate probe step is base_step * max(|x_c|, 1). For Richardson,
/// base_step is the coarsest step; each further level halves it.
struct DerivControl {
  DerivMethod method = DerivMethod::richardson;
  double base_step = 1e-4;
  int richardson_levels = 4;

  static DerivControl central(double base_step = 1e-6) {
    return {DerivMethod::central, base_step, 4};
  }
  static DerivControl richardson(double base_step = 1e-4, int levels = 4) {
    return {DerivMethod::richardson, base_step, levels};
  }

  /// Throws ArgumentError when base_step <= 0 or levels outside [2, 10].
  void validate() const;
};

using VectorFn = std::function<Vector(const Vector&)>;

struct JacobianResult {
  Matrix value;
  /// Columns where f was NaN on one side and a one-sided difference was used.
  std::vector<Index> one_sided_columns;

  bool reduced_accuracy() const noexcept { return !one_sided_columns.empty(); }
};

/// Finite-difference Jacobian, entry (r, c) = d f_r / d x_c.
/// Throws DerivativeError naming the coordinate when no usable probe exists.
JacobianResult jacobian(const VectorFn& f, const Vector& x, const DerivControl& ctrl = {});

/// A_i = -d psi(O_i, theta) / d theta.
JacobianResult neg_jacobian_at(const UnitPsi& unit_psi, const Vector& theta,
                               const DerivControl& ctrl = {});

}  // namespace mest
