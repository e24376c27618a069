#include <algorithm>
#include <charconv>
#include <sstream>

#include "mest/cli.hpp"
#include "mest/estimators.hpp"

namespace mest::cli {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item(text.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(std::move(item));
    pos = comma + 1;
  }
  return out;
}

const std::string& required(const EstimatorArgs& args, const std::string& estimator,
                            std::string_view key) {
  auto it = args.find(key);
  if (it == args.end() || it->second.empty()) {
    throw UsageError("estimator '" + estimator + "' needs --" + std::string(key));
  }
  return it->second;
}

std::string optional_arg(const EstimatorArgs& args, std::string_view key, std::string fallback) {
  auto it = args.find(key);
  return it == args.end() ? fallback : it->second;
}

double parse_double(const std::string& text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("cannot parse " + std::string(what) + " value '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, std::string_view what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("cannot parse " + std::string(what) + " value '" + text + "' as a boolean");
}

ModelSpec model_from(const EstimatorArgs& args, const std::string& estimator, ModelKind kind) {
  ModelSpec m;
  m.kind = kind;
  m.response = required(args, estimator, "response");
  m.covariates = split_list(optional_arg(args, "covariates", ""));
  m.intercept = parse_bool(optional_arg(args, "intercept", "true"), "intercept");
  return m;
}

}  // namespace

std::vector<std::string> estimator_names() {
  return {"moments", "ratio", "delta", "linear", "logistic", "gee", "doubly_robust"};
}

EstimatorSpec make_estimator(const std::string& name, const EstimatorArgs& args) {
  if (name == "moments") return moments_spec(required(args, name, "y"));
  if (name == "delta") return delta_spec(required(args, name, "y"));
  if (name == "ratio") return ratio_spec(required(args, name, "y1"), required(args, name, "y2"));
  if (name == "linear") return linear_score_spec(model_from(args, name, ModelKind::linear));
  if (name == "logistic") return logistic_score_spec(model_from(args, name, ModelKind::logistic));
  if (name == "gee") {
    const std::string family = optional_arg(args, "family", "gaussian");
    ModelKind kind;
    if (family == "gaussian") {
      kind = ModelKind::linear;
    } else if (family == "binomial") {
      kind = ModelKind::logistic;
    } else {
      throw UsageError("unknown GEE family '" + family + "' (gaussian, binomial)");
    }
    GeeConfig cfg;
    cfg.model = model_from(args, name, kind);
    cfg.alpha = parse_double(required(args, name, "alpha"), "alpha");
    cfg.phi = parse_double(required(args, name, "phi"), "phi");
    return gee_spec(cfg);
  }
  if (name == "doubly_robust") {
    ModelSpec ps;
    ps.kind = ModelKind::logistic;
    ps.response = required(args, name, "treatment");
    ps.covariates = split_list(required(args, name, "ps_covariates"));
    ModelSpec outcome;
    outcome.kind = ModelKind::linear;
    outcome.response = required(args, name, "outcome");
    outcome.covariates = split_list(required(args, name, "outcome_covariates"));
    return doubly_robust_spec(ps, outcome, outcome);
  }
  throw UsageError("unknown estimator '" + name + "'; registered: " + join(estimator_names()));
}

std::vector<std::string> correction_kinds() { return {"fay_bias", "newey_west"}; }

CorrectionSpec parse_correction(const std::string& text) {
  const std::size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name.empty()) throw UsageError("correction '" + text + "' has no name");

  std::string kind;
  for (const auto& k : correction_kinds()) {
    if ((name == k || name.rfind(k + "_", 0) == 0) && k.size() > kind.size()) kind = k;
  }
  if (kind.empty()) {
    throw UsageError("unknown correction '" + name + "'; kinds: " + join(correction_kinds()));
  }

  Args args;
  if (colon != std::string::npos) {
    for (const auto& pair : split_list(std::string_view(text).substr(colon + 1))) {
      const std::size_t eq = pair.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw UsageError("correction argument '" + pair + "' is not key=value");
      }
      const std::string key = pair.substr(0, eq);
      const std::string value = pair.substr(eq + 1);
      std::int64_t as_int = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), as_int);
      if (ec == std::errc() && ptr == value.data() + value.size()) {
        args[key] = as_int;
      } else {
        args[key] = parse_double(value, key);
      }
    }
  }

  const std::vector<std::string> allowed =
      kind == "fay_bias" ? std::vector<std::string>{"b"} : std::vector<std::string>{"lag"};
  for (const auto& [key, value] : args) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("correction '" + name + "' does not take '" + key + "'");
    }
  }
  try {
    if (kind == "fay_bias") return fay_bias(name, arg_real(args, "b"));
    return newey_west(name, arg_int(args, "lag"));
  } catch (const ArgumentError& e) {
    throw UsageError("correction '" + name + "': " + e.what());
  }
}

}  // namespace mest::cli
