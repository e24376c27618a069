#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/SVD>

#include "mest/rootfind.hpp"

namespace mest {

namespace {

constexpr int kMaxHalvings = 20;
constexpr int kMaxDampingRetries = 20;
// Reciprocal condition below which the Newton Jacobian counts as singular.
constexpr double kSingularRcond = 1e-13;
// A Newton correction this small relative to theta means we are at the root.
constexpr double kStepTol = 1e-6;

double sup_norm(const Vector& v) {
  if (!v.allFinite()) return std::numeric_limits<double>::infinity();
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

struct Linearization {
  Matrix J;
  bool singular = false;
  Vector newton_step;  // valid when !singular
};

Linearization linearize(const SystemFn& system, const Vector& theta, const Vector& g,
                        const DerivControl& deriv) {
  Linearization lin;
  lin.J = jacobian(system, theta, deriv).value;
  if (!lin.J.allFinite()) {
    lin.singular = true;
    return lin;
  }
  Eigen::JacobiSVD<Matrix> svd(lin.J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  lin.singular = !(smax > 0.0) || smin / smax < kSingularRcond;
  if (!lin.singular) lin.newton_step = -svd.solve(g);
  return lin;
}

struct Trial {
  Vector theta;
  Vector g;
  double r = std::numeric_limits<double>::infinity();
};

Trial evaluate(const SystemFn& system, Vector theta) {
  Trial t;
  t.g = system(theta);
  t.r = sup_norm(t.g);
  t.theta = std::move(theta);
  return t;
}

}  // namespace

RootResult newton_solve(const SystemFn& system, const RootControl& ctrl) {
  if (!(ctrl.abs_tol > 0.0)) throw ArgumentError("abs_tol must be positive");
  if (ctrl.max_iter < 1) throw ArgumentError("max_iter must be at least 1");
  if (ctrl.start.size() == 0) throw ArgumentError("start vector is empty");
  if (!ctrl.start.allFinite()) throw ArgumentError("start vector has non-finite entries");
  ctrl.deriv.validate();

  Trial cur = evaluate(system, ctrl.start);
  if (cur.g.size() != ctrl.start.size()) {
    throw ContractError("system returned " + std::to_string(cur.g.size()) +
                        " equations for " + std::to_string(ctrl.start.size()) + " unknowns");
  }
  auto snapshot = [&](int iters, bool converged) {
    return RootResult{cur.theta, cur.r, iters, converged};
  };
  if (!std::isfinite(cur.r)) {
    throw NonConvergenceError("estimating equations are not finite at the start value",
                              snapshot(0, false));
  }

  for (int iter = 0;; ++iter) {
    const Linearization lin = linearize(system, cur.theta, cur.g, ctrl.deriv);
    const double theta_scale = 1.0 + sup_norm(cur.theta);

    if (cur.r <= ctrl.abs_tol) {
      if (lin.singular) {
        throw NonConvergenceError(
            "residual vanishes but the Jacobian is singular: the root is not isolated "
            "(e.g. complete separation or an unidentified parameter)",
            snapshot(iter, false));
      }
      if (sup_norm(lin.newton_step) <= kStepTol * theta_scale) return snapshot(iter, true);
    }
    if (iter >= ctrl.max_iter) {
      if (lin.singular) {
        throw SingularJacobianError("iteration budget exhausted with a singular Newton Jacobian",
                                    snapshot(iter, false));
      }
      throw NonConvergenceError("iteration budget of " + std::to_string(ctrl.max_iter) +
                                    " exhausted (residual " + std::to_string(cur.r) + ")",
                                snapshot(iter, false));
    }

    std::optional<Trial> accepted;
    if (!lin.singular) {
      if (ctrl.damping == Damping::none) {
        Trial t = evaluate(system, cur.theta + lin.newton_step);
        if (!std::isfinite(t.r)) {
          throw NonConvergenceError("undamped Newton step left the domain of psi",
                                    snapshot(iter, false));
        }
        accepted = std::move(t);
      } else {
        double lambda = 1.0;
        for (int h = 0; h <= kMaxHalvings && !accepted; ++h, lambda *= 0.5) {
          Trial t = evaluate(system, cur.theta + lambda * lin.newton_step);
          if (t.r < cur.r) accepted = std::move(t);
        }
      }
    }

    if (!accepted) {
      // Levenberg-Marquardt fallback on the same linearization.
      const Matrix JtJ = lin.J.transpose() * lin.J;
      const Vector Jtg = lin.J.transpose() * cur.g;
      double mu = 1e-3 * std::max(JtJ.diagonal().cwiseAbs().maxCoeff(), 1e-12);
      if (lin.J.allFinite()) {
        for (int k = 0; k < kMaxDampingRetries && !accepted; ++k, mu *= 10.0) {
          Matrix M = JtJ;
          M.diagonal().array() += mu;
          const Vector step = -M.ldlt().solve(Jtg);
          if (!step.allFinite()) continue;
          Trial t = evaluate(system, cur.theta + step);
          if (t.r < cur.r) accepted = std::move(t);
        }
      }
    }

    if (!accepted) {
      if (cur.r <= ctrl.abs_tol) return snapshot(iter, true);  // residual at rounding floor
      if (lin.singular) {
        throw SingularJacobianError("Newton Jacobian is singular and damped steps cannot "
                                    "reduce the residual",
                                    snapshot(iter, false));
      }
      throw NonConvergenceError("line search failed to reduce the residual",
                                snapshot(iter, false));
    }
    cur = std::move(*accepted);
  }
}

RootResult solve(std::span<const UnitPsi> psis, const RootControl& ctrl) {
  if (psis.empty()) throw ArgumentError("no units to solve over");
  if (psis.front().p() != psis.front().input_dim()) {
    throw ArgumentError("estimating system is not square");
  }
  check_parameter(ctrl.start, psis.front().p(), "start");
  return newton_solve([psis](const Vector& theta) { return sum_psi(psis, theta); }, ctrl);
}

RootResult solve(const EstimatorSpec& spec, const UnitPartition& partition,
                 const RootControl& ctrl) {
  const auto psis = build_unit_psis(spec, partition);
  return solve(psis, ctrl);
}

}  // namespace mest
