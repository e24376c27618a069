#pragma once

#include <functional>
#include <span>
#include <string>

#include "mest/core.hpp"
#include "mest/error.hpp"
#include "mest/numderiv.hpp"

namespace mest {

enum class Damping { none, backtracking };

struct RootControl {
  Vector start;
  /// Tolerance on the sup-norm of G_m(theta) = sum_i psi(O_i, theta).
  double abs_tol = 1e-10;
  int max_iter = 100;
  Damping damping = Damping::backtracking;
  /// Jacobian of G_m used for Newton steps.
  DerivControl deriv = DerivControl::central();
};

struct RootResult {
  Vector theta_hat;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Iteration budget exhausted, or the residual stalled away from a root.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, RootResult best)
      : Error(what), best_(std::move(best)) {}
  const RootResult& best() const noexcept { return best_; }

 private:
  RootResult best_;
};

/// Newton Jacobian stayed singular after all damping retries.
class SingularJacobianError : public SingularityError {
 public:
  SingularJacobianError(const std::string& what, RootResult best)
      : SingularityError(what), best_(std::move(best)) {}
  const RootResult& best() const noexcept { return best_; }

 private:
  RootResult best_;
};

using SystemFn = std::function<Vector(const Vector&)>;

/// Damped Newton on G(theta) = 0. A full step is tried first and halved up
/// to 20 times until the sup-norm residual decreases (NaN counts as no
/// decrease). When the Jacobian is singular or halving fails, up to 20
/// Levenberg-Marquardt steps with growing damping are tried instead.
/// Convergence requires the residual under abs_tol and a Newton correction
/// that is negligible relative to theta (or one that cannot reduce the
/// residual any further).
RootResult newton_solve(const SystemFn& system, const RootControl& ctrl);

RootResult solve(std::span<const UnitPsi> psis, const RootControl& ctrl);
RootResult solve(const EstimatorSpec& spec, const UnitPartition& partition,
                 const RootControl& ctrl);

}  // namespace mest
