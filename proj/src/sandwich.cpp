#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "mest/error.hpp"
#include "mest/parallel.hpp"
#include "mest/sandwich.hpp"

namespace mest {

SandwichComponents compute_components(std::span<const UnitPsi> psis, const Vector& theta_hat,
                                      const DerivControl& ctrl,
                                      ComponentDiagnostics* diagnostics) {
  if (psis.empty()) throw ArgumentError("no units");
  const Index p = psis.front().p();
  check_parameter(theta_hat, psis.front().input_dim(), "theta_hat");
  ctrl.validate();

  const std::size_t m = psis.size();
  SandwichComponents c;
  c.A_list.resize(m);
  c.B_list.resize(m);
  c.ee_list.resize(m);
  std::vector<char> one_sided(m, 0);

  parallel_for(m, [&](std::size_t i) {
    JacobianResult jac;
    try {
      jac = neg_jacobian_at(psis[i], theta_hat, ctrl);
    } catch (const DerivativeError& e) {
      throw DerivativeError(e.coordinate(), "unit " + std::to_string(i) + " ('" +
                                                psis[i].unit_id() + "'): " + e.what());
    }
    if (jac.value.rows() != p || jac.value.cols() != p) {
      throw ContractError("unit " + std::to_string(i) + ": A_i is not square");
    }
    c.A_list[i] = std::move(jac.value);
    one_sided[i] = jac.reduced_accuracy();
    c.ee_list[i] = psis[i](theta_hat);
    c.B_list[i] = c.ee_list[i] * c.ee_list[i].transpose();
  });

  c.A = Matrix::Zero(p, p);
  c.B = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < m; ++i) {
    c.A += c.A_list[i];
    c.B += c.B_list[i];
  }
  if (diagnostics) {
    diagnostics->one_sided_units.clear();
    for (std::size_t i = 0; i < m; ++i) {
      if (one_sided[i]) diagnostics->one_sided_units.push_back(i);
    }
  }
  return c;
}

SandwichComponents compute_components(const EstimatorSpec& spec, const UnitPartition& partition,
                                      const Vector& theta_hat, const DerivControl& ctrl) {
  const auto psis = build_unit_psis(spec, partition);
  return compute_components(psis, theta_hat, ctrl);
}

Matrix compute_sigma(const Matrix& A, const Matrix& B, std::vector<std::string>* warnings) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows() || A.rows() == 0) {
    throw ArgumentError("compute_sigma needs square A and B of equal size");
  }
  if (!A.allFinite() || !B.allFinite()) throw ArgumentError("A or B has non-finite entries");

  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > kMaxBreadCondition) {
    throw SingularityError("bread matrix A is singular or nearly so (condition number " +
                           (smin > 0.0 ? std::to_string(smax / smin) : std::string("inf")) +
                           ")");
  }
  const Matrix Ainv = A.fullPivLu().inverse();
  const Matrix raw = Ainv * B * Ainv.transpose();

  if (warnings) {
    const double scale = raw.cwiseAbs().maxCoeff();
    const double asym = (raw - raw.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-8 * scale) {
      warnings->push_back("sandwich asymmetry " + std::to_string(asym / scale) +
                          " (relative) before symmetrization");
    }
  }
  return 0.5 * (raw + raw.transpose());
}

namespace {

template <typename F>
auto in_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(stage);
    throw;
  }
}

}  // namespace

MEstimationResult m_estimate(const EstimatorSpec& spec, const UnitPartition& partition,
                             const RootSpec& roots, const DerivControl& deriv,
                             const std::vector<CorrectionSpec>& corrections) {
  if (spec.input_dim() != spec.p) {
    throw ArgumentError("estimator '" + spec.name + "' is not a square system");
  }
  MEstimationResult result;
  auto& diag = result.diagnostics;
  diag.deriv = deriv;
  diag.m = partition.m();
  diag.p = spec.p;

  in_stage("check", [&] {
    if (partition.m() == 0) throw ArgumentError("partition has no units");
    if (spec.check) spec.check(partition);
  });
  const auto psis = in_stage("build", [&] {
    std::vector<UnitPsi> out;
    out.reserve(partition.m());
    for (const auto& unit : partition.units) out.push_back(build_unit_psi(spec, unit));
    return out;
  });

  if (const auto* ctrl = std::get_if<RootControl>(&roots)) {
    diag.root = in_stage("rootfind", [&] { return solve(psis, *ctrl); });
    diag.solved = true;
    result.theta_hat = diag.root.theta_hat;
  } else {
    const auto& fixed = std::get<FixedRoots>(roots);
    in_stage("rootfind", [&] { check_parameter(fixed.theta, spec.p, "roots"); });
    result.theta_hat = fixed.theta;
    diag.root.theta_hat = fixed.theta;
    diag.root.residual_norm =
        in_stage("rootfind", [&] { return sum_psi(psis, fixed.theta).cwiseAbs().maxCoeff(); });
    diag.root.iterations = 0;
    diag.root.converged = true;
  }

  ComponentDiagnostics comp_diag;
  result.components =
      in_stage("components", [&] { return compute_components(psis, result.theta_hat, deriv, &comp_diag); });
  diag.one_sided_units = std::move(comp_diag.one_sided_units);
  if (!diag.one_sided_units.empty()) {
    diag.warnings.push_back(std::to_string(diag.one_sided_units.size()) +
                            " unit(s) needed one-sided derivatives (reduced accuracy)");
  }

  result.sigma_hat = in_stage("sigma", [&] {
    return compute_sigma(result.components.A, result.components.B, &diag.warnings);
  });

  if (spec.diagnose) {
    for (auto& msg : spec.diagnose(partition, result.theta_hat)) {
      diag.warnings.push_back(std::move(msg));
    }
  }

  result.corrections =
      in_stage("corrections", [&] { return apply_corrections(result.components, corrections); });
  return result;
}

}  // namespace mest
