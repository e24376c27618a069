#include <cmath>
#include <numbers>

#include "mest/error.hpp"
#include "mest/simulate.hpp"

namespace mest {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(seed + stream * kGolden)) {}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Dataset gen_geexex(std::size_t m, std::uint64_t seed) {
  if (m < 2) throw ArgumentError("gen_geexex needs m >= 2");
  RandomStream s_y1(seed, 0), s_y2(seed, 1), s_x1(seed, 2), s_x2(seed, 3), s_eps(seed, 4);
  NumericColumn y1(m), y2(m), x1(m), x2(m), y4(m);
  const auto& b = kGeexexY4Coefficients;
  for (std::size_t i = 0; i < m; ++i) {
    y1[i] = s_y1.normal(5.0, 4.0);
    y2[i] = s_y2.normal(2.0, 1.0);
    x1[i] = s_x1.normal();
    x2[i] = s_x2.normal();
    y4[i] = b[0] + b[1] * x1[i] + b[2] * x2[i] + s_eps.normal();
  }
  Dataset ds;
  ds.add_numeric("Y1", std::move(y1));
  ds.add_numeric("Y2", std::move(y2));
  ds.add_numeric("X1", std::move(x1));
  ds.add_numeric("X2", std::move(x2));
  ds.add_numeric("Y4", std::move(y4));
  return ds;
}

Dataset gen_lunceford(const GenConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("gen_lunceford needs n >= 1");
  if (cfg.beta.size() != 4 || cfg.nu.size() != 5 || cfg.xi.size() != 3) {
    throw ArgumentError("gen_lunceford expects beta of length 4, nu of length 5, xi of length 3");
  }

  // Order (X1, V1, X2, V2).
  Eigen::Matrix4d cov;
  cov << 1.0, 0.5, -0.5, -0.5,
         0.5, 1.0, -0.5, -0.5,
        -0.5, -0.5, 1.0, 0.5,
        -0.5, -0.5, 0.5, 1.0;
  const Eigen::Matrix4d L = cov.llt().matrixL();
  const Eigen::Vector4d tau0(-1.0, -1.0, 1.0, 1.0);
  const Eigen::Vector4d tau1 = -tau0;

  RandomStream s_x3(cfg.seed, 0), s_v3(cfg.seed, 1), s_mvn(cfg.seed, 2), s_z(cfg.seed, 3),
      s_eps(cfg.seed, 4);
  const std::size_t n = cfg.n;
  NumericColumn y(n), x1(n), x2(n), x3(n), z(n), v1(n), v2(n), v3(n);
  const auto& beta = cfg.beta;
  const auto& nu = cfg.nu;
  const auto& xi = cfg.xi;
  for (std::size_t i = 0; i < n; ++i) {
    x3[i] = s_x3.bernoulli(0.2) ? 1.0 : 0.0;
    v3[i] = s_v3.bernoulli(0.75 * x3[i] + 0.25 * (1.0 - x3[i])) ? 1.0 : 0.0;
    Eigen::Vector4d draw;
    for (int k = 0; k < 4; ++k) draw[k] = s_mvn.normal();
    Eigen::Vector4d hold = L * draw + (x3[i] == 1.0 ? tau1 : tau0);
    x1[i] = hold[0];
    v1[i] = hold[1];
    x2[i] = hold[2];
    v2[i] = hold[3];
    const double lp = beta[0] + beta[1] * x1[i] + beta[2] * x2[i] + beta[3] * x3[i];
    z[i] = s_z.bernoulli(expit(lp)) ? 1.0 : 0.0;
    y[i] = nu[0] + nu[1] * x1[i] + nu[2] * x2[i] + nu[3] * x3[i] + nu[4] * z[i] +
           xi[0] * v1[i] + xi[1] * v2[i] + xi[2] * v3[i] + s_eps.normal();
  }
  Dataset ds;
  ds.add_numeric("Y", std::move(y));
  ds.add_numeric("X1", std::move(x1));
  ds.add_numeric("X2", std::move(x2));
  ds.add_numeric("X3", std::move(x3));
  ds.add_numeric("Z", std::move(z));
  ds.add_numeric("V1", std::move(v1));
  ds.add_numeric("V2", std::move(v2));
  ds.add_numeric("V3", std::move(v3));
  return ds;
}

}  // namespace mest
