#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mest/data.hpp"

namespace mest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// theta. Positions are 0-based everywhere, including the JSON interface.
using ParameterVector = Vector;

using ArgValue = std::variant<double, std::int64_t, std::string>;
using Args = std::map<std::string, ArgValue, std::less<>>;

/// Integer arguments are widened. Throws ArgumentError if missing or textual.
double arg_real(const Args& args, std::string_view key);
std::int64_t arg_int(const Args& args, std::string_view key);

/// Inner function of an estimating function: theta -> psi(O_i, theta).
using PsiFn = std::function<Vector(const Vector& theta, const Args& inner)>;
/// Outer function: binds one data unit (plus outer arguments) into a PsiFn.
using OuterBuild = std::function<PsiFn(const DataUnit& unit, const Args& outer)>;

enum class UnitShape {
  /// outer_build receives the whole unit (clusters, e.g. GEE).
  whole_block,
  /// outer_build receives single-row units; contributions are summed per unit.
  row_sum,
};

struct EstimatorSpec {
  std::string name;
  /// Number of estimating equations (output length of psi).
  Index p = 0;
  /// Length of theta psi reads; 0 means p. Only stack members may differ.
  Index theta_dim = 0;
  UnitShape shape = UnitShape::row_sum;
  OuterBuild outer_build;
  Args outer_args;
  Args inner_args;
  /// Optional data-level precondition, run once before building unit psis.
  std::function<void(const UnitPartition&)> check;
  /// Optional post-fit diagnostics (human-readable warnings).
  std::function<std::vector<std::string>(const UnitPartition&, const Vector&)> diagnose;

  Index input_dim() const noexcept { return theta_dim == 0 ? p : theta_dim; }
};

/// psi bound to one data unit. Immutable and safe to call concurrently.
class UnitPsi {
 public:
  UnitPsi(PsiFn fn, Index p, Index input_dim, Args inner, std::string unit_id);

  /// Evaluates with the inner arguments bound at build time.
  Vector operator()(const Vector& theta) const { return eval(theta, inner_); }
  /// Throws ContractError when psi returns a vector of the wrong length.
  Vector eval(const Vector& theta, const Args& inner) const;

  Index p() const noexcept { return p_; }
  Index input_dim() const noexcept { return input_dim_; }
  const std::string& unit_id() const noexcept { return unit_id_; }

 private:
  PsiFn fn_;
  Index p_;
  Index input_dim_;
  Args inner_;
  std::string unit_id_;
};

UnitPsi build_unit_psi(const EstimatorSpec& spec, const DataUnit& unit);

/// Runs spec.check, then builds every unit's psi (in partition order).
std::vector<UnitPsi> build_unit_psis(const EstimatorSpec& spec, const UnitPartition& partition);

/// G_m(theta) = sum_i psi(O_i, theta), reduced in unit order.
Vector sum_psi(std::span<const UnitPsi> psis, const Vector& theta);
Vector sum_psi(const EstimatorSpec& spec, const UnitPartition& partition, const Vector& theta);

/// Throws ArgumentError unless theta has length p and finite entries.
void check_parameter(const Vector& theta, Index p, std::string_view what = "theta");

struct IndexRange {
  Index offset = 0;
  Index length = 0;
};

struct StackBlock {
  EstimatorSpec spec;
  /// Where this block's equations sit; also the theta slice it reads.
  IndexRange range;
  /// Pass the whole stacked theta instead of the slice (e.g. a contrast
  /// that depends on nuisance parameters).
  bool reads_full_theta = false;
};

/// Joint system of several estimating functions. The ranges must tile
/// [0, sum p_k) without gaps or overlaps.
EstimatorSpec stack(std::vector<StackBlock> blocks, std::string name = "stack");
/// Consecutive layout in list order.
EstimatorSpec stack(const std::vector<EstimatorSpec>& specs, std::string name = "stack");

}  // namespace mest
