#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mest/data.hpp"

namespace mest {

/// Portable random stream: std::mt19937_64 seeded with
/// splitmix64(seed + stream * 0x9E3779B97F4A7C15). Uniforms take the top 53
/// bits of one draw; normals come from the cosine branch of Box-Muller on two
/// consecutive uniforms. The whole chain is specified down to the bit so
/// datasets can be reproduced outside this library.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Coefficients (intercept, X1, X2) used for the Y4 column of gen_geexex.
inline constexpr std::array<double, 3> kGeexexY4Coefficients{1.0, 2.0, -1.0};

/// Columns Y1 ~ N(5, 16), Y2 ~ N(2, 1), X1, X2 ~ N(0, 1) and
/// Y4 = 1 + 2 X1 - X2 + N(0, 1). Each column draws from its own stream.
Dataset gen_geexex(std::size_t m, std::uint64_t seed);

struct GenConfig {
  std::size_t n = 1000;
  std::vector<double> beta{0.0, 0.6, -0.6, 0.6};
  std::vector<double> nu{0.0, -1.0, 1.0, -1.0, 2.0};
  std::vector<double> xi{-1.0, 1.0, 1.0};
  std::uint64_t seed = 1;
};

/// Observational-study generator with confounders X1..X3, outcome-only
/// covariates V1..V3, binary treatment Z and continuous outcome Y.
/// (X1, V1, X2, V2) is drawn as L z with L the lower Cholesky factor of the
/// fixed 4x4 covariance and z iid standard normal, then shifted by
/// tau1 = (1, 1, -1, -1) when X3 = 1 and tau0 = -tau1 otherwise.
/// Z ~ Bern(expit(beta . (1, X1, X2, X3))) and
/// Y = nu . (1, X1, X2, X3, Z) + xi . (V1, V2, V3) + N(0, 1).
Dataset gen_lunceford(const GenConfig& cfg);

}  // namespace mest
