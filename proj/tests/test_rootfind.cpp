#include <doctest.h>

#include <cmath>
#include <random>

#include "mest/error.hpp"
#include "mest/estimators.hpp"
#include "mest/rootfind.hpp"
#include "mest/simulate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mest;
using namespace mest::testing;

namespace {

RootControl from(Vector start) {
  RootControl ctrl;
  ctrl.start = std::move(start);
  return ctrl;
}

// Scales every unit's psi by a constant.
EstimatorSpec scaled(EstimatorSpec spec, double c) {
  auto inner = spec.outer_build;
  spec.outer_build = [inner, c](const DataUnit& unit, const Args& outer) -> PsiFn {
    PsiFn psi = inner(unit, outer);
    return [psi, c](const Vector& theta, const Args& args) -> Vector {
      return c * psi(theta, args);
    };
  };
  return spec;
}

}  // namespace

TEST_CASE("RootControl validation") {
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  RootControl ctrl = from(vec({0}));
  ctrl.abs_tol = 0.0;
  CHECK_THROWS_AS(solve(mean_spec("Y"), part, ctrl), ArgumentError);
  ctrl = from(vec({0}));
  ctrl.max_iter = 0;
  CHECK_THROWS_AS(solve(mean_spec("Y"), part, ctrl), ArgumentError);
  CHECK_THROWS_AS(solve(mean_spec("Y"), part, from(vec({0, 0}))), ArgumentError);
}

TEST_CASE("mean of 1, 2, 3 from zero") {
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  const RootResult r = solve(mean_spec("Y"), part, from(vec({0})));
  CHECK(r.converged);
  CHECK(std::abs(r.theta_hat[0] - 2.0) <= 1e-10);
  CHECK(r.residual_norm <= 1e-10);
}

TEST_CASE("moments roots are the mean and m-divisor variance") {
  const Dataset ds = gen_geexex(100, 1);
  const auto& y = ds.numeric("Y1");
  const RootResult r = solve(moments_spec("Y1"), partition_units(ds), from(vec({0, 1})));
  REQUIRE(r.converged);
  CHECK(std::abs(r.theta_hat[0] - mean(y)) < 1e-8);
  CHECK(std::abs(r.theta_hat[1] - central_moment(y, 2)) < 1e-8);
}

TEST_CASE("ratio root is the ratio of means") {
  const Dataset ds = gen_geexex(100, 2);
  const RootResult r = solve(ratio_spec("Y1", "Y2"), partition_units(ds), from(vec({1, 1, 1})));
  REQUIRE(r.converged);
  CHECK(std::abs(r.theta_hat[2] - mean(ds.numeric("Y1")) / mean(ds.numeric("Y2"))) < 1e-10);
}

TEST_CASE("ratio with a zero-mean denominator is a singular system") {
  const UnitPartition part = rows_of({{"Y1", {1, 2, 3}}, {"Y2", {-1, 0, 1}}});
  try {
    solve(ratio_spec("Y1", "Y2"), part, from(vec({0, 0, 0})));
    FAIL("expected a singularity error");
  } catch (const SingularJacobianError& e) {
    CHECK_FALSE(e.best().converged);
    CHECK(e.best().theta_hat.size() == 3);
  }
}

TEST_CASE("delta system starting at a non-positive variance recovers") {
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  const RootResult r = solve(delta_spec("Y"), part, from(vec({1, 1, 1, 1})));
  REQUIRE(r.converged);
  CHECK(std::abs(r.theta_hat[1] - 2.0 / 3.0) < 1e-10);
  CHECK(std::abs(r.theta_hat[2] - std::sqrt(2.0 / 3.0)) < 1e-10);
  CHECK(std::abs(r.theta_hat[3] - std::log(2.0 / 3.0)) < 1e-10);
  // A start where psi is NaN cannot be used.
  CHECK_THROWS_AS(solve(delta_spec("Y"), part, from(vec({0, 0, 0, 0}))), NonConvergenceError);
}

TEST_CASE("linear score converges in one Newton step from any start") {
  const Dataset ds = gen_geexex(100, 3);
  const ModelSpec model{ModelKind::linear, "Y4", {"X1", "X2"}, true, std::nullopt};
  const Matrix X = design_matrix(ds, model.covariates, true);
  const Vector ols = oracle::ols_hc0(X, to_eigen(ds.numeric("Y4"))).coef;
  const auto psis = build_unit_psis(linear_score_spec(model), partition_units(ds));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    RootControl ctrl = from(vec({normal(rng), normal(rng), normal(rng)}));
    ctrl.max_iter = 1;
    Vector after_one;
    try {
      after_one = solve(psis, ctrl).theta_hat;
    } catch (const NonConvergenceError& e) {
      after_one = e.best().theta_hat;
    }
    // One step lands on the least-squares solution up to finite-difference error.
    REQUIRE(max_abs_diff(after_one, ols) < 1e-7);

    ctrl.max_iter = 100;
    const RootResult full = solve(psis, ctrl);
    REQUIRE(full.converged);
    REQUIRE(full.iterations <= 2);
    REQUIRE(max_abs_diff(full.theta_hat, ols) < 1e-10);
  }
}

TEST_CASE("scaling every psi by a positive constant leaves the root unchanged") {
  const Dataset ds = gen_geexex(60, 5);
  const UnitPartition part = partition_units(ds);
  const Vector base = solve(ratio_spec("Y1", "Y2"), part, from(vec({1, 1, 1}))).theta_hat;
  for (double c : {1e-3, 0.5, 7.0, 250.0}) {
    RootControl ctrl = from(vec({1, 1, 1}));
    ctrl.abs_tol = 1e-10 * std::max(c, 1.0);
    const Vector r = solve(scaled(ratio_spec("Y1", "Y2"), c), part, ctrl).theta_hat;
    CHECK(max_abs_diff(r, base) < 1e-8);
  }
}

TEST_CASE("starting at the root converges in zero or one iterations") {
  const Dataset ds = gen_geexex(80, 6);
  const UnitPartition part = partition_units(ds);
  for (const EstimatorSpec& spec : {moments_spec("Y1"), ratio_spec("Y1", "Y2"), delta_spec("Y1")}) {
    const RootResult first = solve(spec, part, from(Vector::Constant(spec.p, 1.0)));
    const RootResult again = solve(spec, part, from(first.theta_hat));
    CHECK(again.converged);
    CHECK(again.iterations <= 1);
  }
}

TEST_CASE("logistic intercept-only root is logit of the mean") {
  const UnitPartition part = rows_of({{"Y", {1, 0, 1, 1, 0, 1, 1, 0}}});
  const ModelSpec model{ModelKind::logistic, "Y", {}, true, std::nullopt};
  const RootResult r = solve(logistic_score_spec(model), part, from(vec({0})));
  REQUIRE(r.converged);
  CHECK(std::abs(r.theta_hat[0] - std::log(5.0 / 3.0)) < 1e-10);

  const UnitPartition half = rows_of({{"Y", {0, 1, 1, 0}}});
  CHECK(std::abs(solve(logistic_score_spec(model), half, from(vec({0.3}))).theta_hat[0]) < 1e-10);
}

TEST_CASE("logistic with complete separation does not converge") {
  const UnitPartition part = rows_of({{"Y", {0, 0, 0, 1, 1, 1}}, {"X", {-3, -2, -1, 1, 2, 3}}});
  const ModelSpec model{ModelKind::logistic, "Y", {"X"}, true, std::nullopt};
  CHECK_THROWS_AS(solve(logistic_score_spec(model), part, from(vec({0, 0}))), NonConvergenceError);
}

TEST_CASE("iteration budget exhaustion carries the best iterate") {
  const Dataset ds = gen_geexex(50, 7);
  RootControl ctrl = from(vec({0, 1}));
  ctrl.max_iter = 1;
  try {
    solve(moments_spec("Y1"), partition_units(ds), ctrl);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.best().iterations == 1);
    CHECK_FALSE(e.best().converged);
    CHECK(std::isfinite(e.best().residual_norm));
  }
}

TEST_CASE("undamped Newton solves smooth systems too") {
  const Dataset ds = gen_geexex(50, 8);
  RootControl ctrl = from(vec({1, 1, 1}));
  ctrl.damping = Damping::none;
  const RootResult r = solve(ratio_spec("Y1", "Y2"), partition_units(ds), ctrl);
  CHECK(r.converged);
  CHECK(std::abs(r.theta_hat[2] - mean(ds.numeric("Y1")) / mean(ds.numeric("Y2"))) < 1e-10);
}

TEST_CASE("newton_solve on a small nonlinear system") {
  const auto system = [](const Vector& x) {
    return vec({x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]});
  };
  const RootResult r = newton_solve(system, from(vec({1, 0.5})));
  REQUIRE(r.converged);
  CHECK(std::abs(r.theta_hat[0] - std::sqrt(2.0)) < 1e-10);
  CHECK(std::abs(r.theta_hat[1] - std::sqrt(2.0)) < 1e-10);
}
