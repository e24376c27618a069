#include <cmath>
#include <limits>

#include "mest/cli.hpp"

namespace mest::cli {

namespace {

using json = nlohmann::ordered_json;

JsonMatrix to_rows(const Matrix& m) {
  JsonMatrix rows(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) {
    rows[r].resize(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
  }
  return rows;
}

json matrix_json(const JsonMatrix& m) {
  if (m.empty()) return nullptr;
  return json(m);
}

JsonMatrix matrix_from(const json& j) {
  if (j.is_null()) return {};
  return j.get<JsonMatrix>();
}

json real_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double real_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

json to_json(const RunReport& report) {
  json j;
  j["estimates"] = report.estimates;
  j["vcov"] = matrix_json(report.vcov);
  json corrections = json::object();
  for (const auto& [name, m] : report.corrections) corrections[name] = matrix_json(m);
  j["corrections"] = std::move(corrections);
  const auto& d = report.diagnostics;
  j["diagnostics"] = {{"converged", d.converged},
                      {"iterations", d.iterations},
                      {"residual_norm", real_json(d.residual_norm)},
                      {"m", d.m},
                      {"p", d.p}};
  return j;
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.estimates = j.at("estimates").get<std::vector<double>>();
  r.vcov = matrix_from(j.at("vcov"));
  for (const auto& [name, m] : j.at("corrections").items()) {
    r.corrections.emplace_back(name, matrix_from(m));
  }
  const auto& d = j.at("diagnostics");
  r.diagnostics.converged = d.at("converged").get<bool>();
  r.diagnostics.iterations = d.at("iterations").get<int>();
  r.diagnostics.residual_norm = real_from(d.at("residual_norm"));
  r.diagnostics.m = d.at("m").get<std::size_t>();
  r.diagnostics.p = d.at("p").get<std::size_t>();
  return r;
}

RunReport make_report(const MEstimationResult& result) {
  RunReport r;
  r.estimates.assign(result.theta_hat.data(), result.theta_hat.data() + result.theta_hat.size());
  r.vcov = to_rows(result.sigma_hat);
  for (const auto& o : result.corrections.outcomes()) {
    r.corrections.emplace_back(o.name, o.value ? to_rows(*o.value) : JsonMatrix{});
  }
  const auto& d = result.diagnostics;
  r.diagnostics.converged = d.root.converged;
  r.diagnostics.iterations = d.root.iterations;
  r.diagnostics.residual_norm = d.root.residual_norm;
  r.diagnostics.m = d.m;
  r.diagnostics.p = static_cast<std::size_t>(d.p);
  return r;
}

}  // namespace mest::cli
