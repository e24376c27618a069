#include <algorithm>
#include <cmath>
#include <optional>

#include "mest/error.hpp"
#include "mest/numderiv.hpp"

namespace mest {

void DerivControl::validate() const {
  if (!(base_step > 0.0) || !std::isfinite(base_step)) {
    throw ArgumentError("derivative base_step must be positive and finite");
  }
  if (richardson_levels < 2 || richardson_levels > 10) {
    throw ArgumentError("richardson_levels must be in [2, 10]");
  }
}

namespace {

// Neville-style Richardson table; `ratio` is the error reduction per halving.
Vector extrapolate(std::vector<Vector> estimates, double ratio) {
  const std::size_t n = estimates.size();
  for (std::size_t j = 1; j < n; ++j) {
    const double factor = std::pow(ratio, static_cast<double>(j));
    for (std::size_t k = n - 1; k >= j; --k) {
      estimates[k] = (factor * estimates[k] - estimates[k - 1]) / (factor - 1.0);
    }
  }
  return estimates.back();
}

struct Probe {
  Vector value;
  double step = 0.0;  // signed, exactly representable displacement
};

class Prober {
 public:
  Prober(const VectorFn& f, const Vector& x) : f_(f), x_(x) {}

  Probe at(Index c, double h) const {
    Vector shifted = x_;
    shifted[c] += h;
    return {f_(shifted), shifted[c] - x_[c]};
  }

  const Vector& center() {
    if (!center_) center_ = f_(x_);
    return *center_;
  }

 private:
  const VectorFn& f_;
  const Vector& x_;
  std::optional<Vector> center_;
};

}  // namespace

JacobianResult jacobian(const VectorFn& f, const Vector& x, const DerivControl& ctrl) {
  ctrl.validate();
  if (x.size() == 0) throw ArgumentError("jacobian needs a non-empty point");
  if (!x.allFinite()) throw ArgumentError("jacobian point has non-finite entries");

  Prober probe(f, x);
  const int levels = ctrl.method == DerivMethod::central ? 1 : ctrl.richardson_levels;
  const int one_sided_levels = std::max(levels, 2);

  JacobianResult result;
  Index q = -1;
  auto record_rows = [&](const Vector& v, Index c) {
    if (q < 0) {
      q = v.size();
      result.value.resize(q, x.size());
    } else if (v.size() != q) {
      throw DerivativeError(c, "function output length changed between probes");
    }
  };

  for (Index c = 0; c < x.size(); ++c) {
    const double h0 = ctrl.base_step * std::max(std::abs(x[c]), 1.0);

    std::vector<Vector> central;
    bool two_sided = true;
    for (int k = 0; k < levels; ++k) {
      const double h = std::ldexp(h0, -k);
      Probe up = probe.at(c, h);
      Probe down = probe.at(c, -h);
      if (!up.value.allFinite() || !down.value.allFinite() ||
          up.value.size() != down.value.size()) {
        two_sided = false;
        break;
      }
      record_rows(up.value, c);
      central.push_back((up.value - down.value) / (up.step - down.step));
    }
    if (two_sided) {
      result.value.col(c) = extrapolate(std::move(central), 4.0);
      continue;
    }

    // One side is outside the domain of f: fall back to one-sided differences.
    const Vector& f0 = probe.center();
    if (!f0.allFinite()) throw DerivativeError(c, "function is not finite at the base point");
    record_rows(f0, c);
    double direction = 1.0;
    if (!probe.at(c, h0).value.allFinite()) {
      direction = -1.0;
      if (!probe.at(c, -h0).value.allFinite()) {
        throw DerivativeError(c, "function is NaN at all probe points");
      }
    }
    std::vector<Vector> forward;
    for (int k = 0; k < one_sided_levels; ++k) {
      Probe side = probe.at(c, direction * std::ldexp(h0, -k));
      if (!side.value.allFinite() || side.value.size() != q) break;
      forward.push_back((side.value - f0) / side.step);
    }
    if (forward.empty()) throw DerivativeError(c, "function is NaN at all probe points");
    result.value.col(c) = extrapolate(std::move(forward), 2.0);
    result.one_sided_columns.push_back(c);
  }
  return result;
}

JacobianResult neg_jacobian_at(const UnitPsi& unit_psi, const Vector& theta,
                               const DerivControl& ctrl) {
  JacobianResult r = jacobian([&](const Vector& t) { return unit_psi(t); }, theta, ctrl);
  r.value = -r.value;
  return r;
}

}  // namespace mest
