#include <algorithm>
#include <cmath>

#include "mest/core.hpp"
#include "mest/error.hpp"
#include "mest/parallel.hpp"

namespace mest {

double arg_real(const Args& args, std::string_view key) {
  auto it = args.find(key);
  if (it == args.end()) throw ArgumentError("missing argument '" + std::string(key) + "'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw ArgumentError("argument '" + std::string(key) + "' is not numeric");
}

std::int64_t arg_int(const Args& args, std::string_view key) {
  auto it = args.find(key);
  if (it == args.end()) throw ArgumentError("missing argument '" + std::string(key) + "'");
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (const auto* d = std::get_if<double>(&it->second)) {
    if (std::trunc(*d) == *d) return static_cast<std::int64_t>(*d);
  }
  throw ArgumentError("argument '" + std::string(key) + "' is not an integer");
}

UnitPsi::UnitPsi(PsiFn fn, Index p, Index input_dim, Args inner, std::string unit_id)
    : fn_(std::move(fn)),
      p_(p),
      input_dim_(input_dim),
      inner_(std::move(inner)),
      unit_id_(std::move(unit_id)) {}

Vector UnitPsi::eval(const Vector& theta, const Args& inner) const {
  if (theta.size() != input_dim_) {
    throw ContractError("unit '" + unit_id_ + "': theta has length " +
                        std::to_string(theta.size()) + ", expected " +
                        std::to_string(input_dim_));
  }
  Vector out = fn_(theta, inner);
  if (out.size() != p_) {
    throw ContractError("unit '" + unit_id_ + "': psi returned " + std::to_string(out.size()) +
                        " values, expected " + std::to_string(p_));
  }
  return out;
}

UnitPsi build_unit_psi(const EstimatorSpec& spec, const DataUnit& unit) {
  if (spec.p < 1) throw ArgumentError("estimator '" + spec.name + "' has p < 1");
  if (!spec.outer_build) throw ArgumentError("estimator '" + spec.name + "' has no outer_build");
  if (unit.rows.n_rows() == 0) throw ArgumentError("unit '" + unit.id + "' has no rows");

  if (spec.shape == UnitShape::whole_block || unit.rows.n_rows() == 1) {
    return UnitPsi(spec.outer_build(unit, spec.outer_args), spec.p, spec.input_dim(),
                   spec.inner_args, unit.id);
  }

  std::vector<PsiFn> rows;
  rows.reserve(unit.rows.n_rows());
  for (std::size_t r = 0; r < unit.rows.n_rows(); ++r) {
    DataUnit row{unit.id, unit.rows.select_rows({r}),
                 {unit.source_rows.empty() ? r : unit.source_rows.at(r)}};
    rows.push_back(spec.outer_build(row, spec.outer_args));
  }
  const Index p = spec.p;
  PsiFn summed = [rows = std::move(rows), p](const Vector& theta, const Args& inner) {
    Vector total = Vector::Zero(p);
    for (const auto& f : rows) {
      Vector v = f(theta, inner);
      if (v.size() != p) return v;  // UnitPsi::eval reports the contract breach
      total += v;
    }
    return total;
  };
  return UnitPsi(std::move(summed), spec.p, spec.input_dim(), spec.inner_args, unit.id);
}

std::vector<UnitPsi> build_unit_psis(const EstimatorSpec& spec, const UnitPartition& partition) {
  if (partition.m() == 0) throw ArgumentError("partition has no units");
  if (spec.check) spec.check(partition);
  std::vector<UnitPsi> out;
  out.reserve(partition.m());
  for (const auto& unit : partition.units) out.push_back(build_unit_psi(spec, unit));
  return out;
}

Vector sum_psi(std::span<const UnitPsi> psis, const Vector& theta) {
  if (psis.empty()) throw ArgumentError("no units to sum over");
  std::vector<Vector> parts(psis.size());
  parallel_for(psis.size(), [&](std::size_t i) { parts[i] = psis[i](theta); });
  Vector total = Vector::Zero(psis.front().p());
  for (const auto& v : parts) total += v;
  return total;
}

Vector sum_psi(const EstimatorSpec& spec, const UnitPartition& partition, const Vector& theta) {
  check_parameter(theta, spec.input_dim());
  const auto psis = build_unit_psis(spec, partition);
  return sum_psi(psis, theta);
}

void check_parameter(const Vector& theta, Index p, std::string_view what) {
  if (theta.size() != p) {
    throw ArgumentError(std::string(what) + " has length " + std::to_string(theta.size()) +
                        ", expected " + std::to_string(p));
  }
  if (!theta.allFinite()) throw ArgumentError(std::string(what) + " has non-finite entries");
}

namespace {

void validate_layout(const std::vector<StackBlock>& blocks, Index total) {
  std::vector<const StackBlock*> order;
  for (const auto& b : blocks) order.push_back(&b);
  std::sort(order.begin(), order.end(), [](const StackBlock* a, const StackBlock* b) {
    return a->range.offset < b->range.offset;
  });
  Index next = 0;
  for (const StackBlock* b : order) {
    if (b->range.length < 1) throw LayoutError("block '" + b->spec.name + "' has empty range");
    if (b->range.offset < next) {
      throw LayoutError("block '" + b->spec.name + "' overlaps position " +
                        std::to_string(b->range.offset));
    }
    if (b->range.offset > next) {
      throw LayoutError("gap in layout at positions [" + std::to_string(next) + ", " +
                        std::to_string(b->range.offset) + ")");
    }
    next = b->range.offset + b->range.length;
  }
  if (next != total) throw LayoutError("layout does not cover all parameters");
}

}  // namespace

EstimatorSpec stack(std::vector<StackBlock> blocks, std::string name) {
  if (blocks.empty()) throw LayoutError("nothing to stack");
  Index total = 0;
  for (const auto& b : blocks) total += b.range.length;
  validate_layout(blocks, total);
  for (const auto& b : blocks) {
    if (b.spec.p != b.range.length) {
      throw LayoutError("block '" + b.spec.name + "' has p = " + std::to_string(b.spec.p) +
                        " but its range has length " + std::to_string(b.range.length));
    }
    const Index expected_input = b.reads_full_theta ? total : b.range.length;
    if (b.spec.input_dim() != expected_input) {
      throw LayoutError("block '" + b.spec.name + "' reads " +
                        std::to_string(b.spec.input_dim()) + " parameters, expected " +
                        std::to_string(expected_input));
    }
  }

  EstimatorSpec out;
  out.name = std::move(name);
  out.p = total;
  out.shape = UnitShape::whole_block;
  out.outer_build = [blocks](const DataUnit& unit, const Args&) -> PsiFn {
    struct Bound {
      UnitPsi psi;
      IndexRange range;
      bool full;
    };
    std::vector<Bound> bound;
    bound.reserve(blocks.size());
    for (const auto& b : blocks) {
      bound.push_back({build_unit_psi(b.spec, unit), b.range, b.reads_full_theta});
    }
    Index p = 0;
    for (const auto& b : blocks) p += b.range.length;
    return [bound = std::move(bound), p](const Vector& theta, const Args&) {
      Vector out(p);
      for (const auto& b : bound) {
        const Vector in = b.full ? theta : Vector(theta.segment(b.range.offset, b.range.length));
        out.segment(b.range.offset, b.range.length) = b.psi(in);
      }
      return out;
    };
  };
  out.check = [blocks](const UnitPartition& partition) {
    for (const auto& b : blocks) {
      if (b.spec.check) b.spec.check(partition);
    }
  };
  out.diagnose = [blocks](const UnitPartition& partition, const Vector& theta) {
    std::vector<std::string> messages;
    for (const auto& b : blocks) {
      if (!b.spec.diagnose) continue;
      const Vector in =
          b.reads_full_theta ? theta : Vector(theta.segment(b.range.offset, b.range.length));
      for (auto& msg : b.spec.diagnose(partition, in)) messages.push_back(std::move(msg));
    }
    return messages;
  };
  return out;
}

EstimatorSpec stack(const std::vector<EstimatorSpec>& specs, std::string name) {
  std::vector<StackBlock> blocks;
  Index offset = 0;
  for (const auto& s : specs) {
    blocks.push_back({s, {offset, s.p}, false});
    offset += s.p;
  }
  return stack(std::move(blocks), std::move(name));
}

}  // namespace mest
