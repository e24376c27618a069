#include <algorithm>
#include <cmath>
#include <set>

#include "mest/corrections.hpp"
#include "mest/error.hpp"
#include "mest/sandwich.hpp"

namespace mest {

const CorrectionOutcome* CorrectionResults::find(std::string_view name) const {
  auto it = std::find_if(outcomes_.begin(), outcomes_.end(),
                         [&](const CorrectionOutcome& o) { return o.name == name; });
  return it == outcomes_.end() ? nullptr : &*it;
}

const Matrix& CorrectionResults::at(std::string_view name) const {
  const CorrectionOutcome* o = find(name);
  if (!o) throw CorrectionError("no correction named '" + std::string(name) + "'");
  if (!o->value) throw CorrectionError("correction '" + o->name + "' failed: " + o->error);
  return *o->value;
}

WeightRule WeightRule::fixed(std::vector<double> by_distance) {
  WeightRule r;
  r.rule_ = std::move(by_distance);
  return r;
}

WeightRule WeightRule::function(WeightFn fn, Args args) {
  if (!fn) throw ArgumentError("weight function is empty");
  WeightRule r;
  r.rule_ = std::move(fn);
  r.args_ = std::move(args);
  return r;
}

double WeightRule::operator()(std::size_t i, std::size_t j) const {
  double w = 0.0;
  if (const auto* v = std::get_if<std::vector<double>>(&rule_)) {
    const std::size_t d = i > j ? i - j : j - i;
    if (d >= v->size()) {
      throw CorrectionError("fixed weights cover distances 0.." +
                            std::to_string(v->size() - 1) + ", pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") needs " + std::to_string(d));
    }
    w = (*v)[d];
  } else {
    w = std::get<WeightFn>(rule_)(i, j, args_);
  }
  if (!std::isfinite(w)) {
    throw CorrectionError("non-finite weight for pair (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
  }
  return w;
}

Matrix fay_bias_correction(const SandwichComponents& components, double b) {
  if (!(b > 0.0 && b < 1.0)) throw ArgumentError("Fay bias correction needs 0 < b < 1");
  const auto& A = components.A;
  const double m = static_cast<double>(components.m());
  if (components.m() == 0) throw ArgumentError("no units");

  // Abar^{-1} = (A / m)^{-1}; compute_sigma below rejects a singular A.
  const Matrix Abar_inv = (A / m).fullPivLu().inverse();
  Matrix meat = Matrix::Zero(A.rows(), A.cols());
  for (std::size_t i = 0; i < components.m(); ++i) {
    const Vector influence = (components.A_list[i] * Abar_inv).diagonal();
    const Vector h = influence.unaryExpr([b](double d) { return 1.0 / std::sqrt(1.0 - std::min(b, d)); });
    meat += h.asDiagonal() * components.B_list[i] * h.asDiagonal();
  }
  return compute_sigma(A, meat);
}

Matrix pairwise_weighted_meat(std::span<const Vector> ee_list, const WeightRule& rule) {
  if (ee_list.empty()) throw ArgumentError("no estimating function values");
  const Index p = ee_list.front().size();
  Matrix meat = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < ee_list.size(); ++i) {
    for (std::size_t j = 0; j < ee_list.size(); ++j) {
      const double w = rule(i, j);
      if (w == 0.0) continue;
      meat += w * (ee_list[i] * ee_list[j].transpose());
    }
  }
  return meat;
}

double newey_west_weight(std::size_t i, std::size_t j, std::int64_t lag) {
  if (lag < 0) throw ArgumentError("Newey-West lag must be non-negative");
  const std::size_t d = i > j ? i - j : j - i;
  if (d > static_cast<std::size_t>(lag)) return 0.0;
  return 1.0 - static_cast<double>(d) / static_cast<double>(lag + 1);
}

Matrix newey_west_correction(const SandwichComponents& components, std::int64_t lag) {
  if (lag < 0) throw ArgumentError("Newey-West lag must be non-negative");
  const auto rule = WeightRule::function(
      [](std::size_t i, std::size_t j, const Args& a) {
        return newey_west_weight(i, j, arg_int(a, "lag"));
      },
      Args{{"lag", lag}});
  return compute_sigma(components.A, pairwise_weighted_meat(components.ee_list, rule));
}

CorrectionSpec fay_bias(std::string name, double b) {
  return {std::move(name),
          [](const SandwichComponents& c, const Args& a) {
            return fay_bias_correction(c, arg_real(a, "b"));
          },
          Args{{"b", b}}};
}

CorrectionSpec newey_west(std::string name, std::int64_t lag) {
  return {std::move(name),
          [](const SandwichComponents& c, const Args& a) {
            return newey_west_correction(c, arg_int(a, "lag"));
          },
          Args{{"lag", lag}}};
}

CorrectionSpec identity_correction(std::string name) {
  return {std::move(name),
          [](const SandwichComponents& c, const Args&) { return compute_sigma(c.A, c.B); },
          {}};
}

CorrectionResults apply_corrections(const SandwichComponents& components,
                                    const std::vector<CorrectionSpec>& specs) {
  std::set<std::string, std::less<>> seen;
  for (const auto& s : specs) {
    if (!seen.insert(s.name).second) {
      throw ArgumentError("duplicate correction name '" + s.name + "'");
    }
    if (!s.apply) throw ArgumentError("correction '" + s.name + "' has no function");
  }

  std::vector<CorrectionOutcome> outcomes;
  outcomes.reserve(specs.size());
  for (const auto& s : specs) {
    CorrectionOutcome o{s.name, std::nullopt, {}};
    try {
      Matrix value = s.apply(components, s.args);
      if (value.rows() != components.p() || value.cols() != components.p()) {
        throw CorrectionError("correction returned a " + std::to_string(value.rows()) + "x" +
                              std::to_string(value.cols()) + " matrix");
      }
      o.value = std::move(value);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    outcomes.push_back(std::move(o));
  }
  return CorrectionResults(std::move(outcomes));
}

}  // namespace mest
