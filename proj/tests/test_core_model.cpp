#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "mest/core.hpp"
#include "mest/error.hpp"
#include "mest/estimators.hpp"
#include "mest/simulate.hpp"
#include "support.hpp"

using namespace mest;
using namespace mest::testing;

namespace {

struct Case {
  std::string label;
  EstimatorSpec spec;
  UnitPartition partition;
};

std::vector<Case> builtin_cases() {
  const Dataset geexex = gen_geexex(40, 21);
  const UnitPartition rows = partition_units(geexex);
  Dataset wb = read_csv(std::filesystem::path(MEST_TEST_DATA_DIR) / "warpbreaks.csv");
  GenConfig cfg;
  cfg.n = 60;
  cfg.seed = 4;
  const Dataset lf = gen_lunceford(cfg);

  ModelSpec lin{ModelKind::linear, "Y4", {"X1", "X2"}, true, std::nullopt};
  ModelSpec gee_model{ModelKind::linear, "breaks", {"tensionM", "tensionH"}, true, std::nullopt};
  ModelSpec ps{ModelKind::logistic, "Z", {"X1", "X2", "X3"}, true, std::nullopt};
  ModelSpec out{ModelKind::linear, "Y", {"X1", "X2", "X3", "V1", "V2", "V3"}, true, std::nullopt};

  std::vector<Case> cases;
  cases.push_back({"mean", mean_spec("Y1"), rows});
  cases.push_back({"moments", moments_spec("Y1"), rows});
  cases.push_back({"ratio", ratio_spec("Y1", "Y2"), rows});
  cases.push_back({"delta", delta_spec("Y1"), rows});
  cases.push_back({"linear", linear_score_spec(lin), rows});
  cases.push_back({"gee", gee_spec({gee_model, 0.1, 120.0}), partition_units(wb, std::string("wool"))});
  cases.push_back({"doubly_robust", doubly_robust_spec(ps, out, out), partition_units(lf)});
  cases.push_back({"stack", stack({mean_spec("Y1"), ratio_spec("Y1", "Y2")}), rows});
  return cases;
}

Vector random_theta(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 2.0);
  Vector theta(n);
  for (Index i = 0; i < n; ++i) theta[i] = normal(rng);
  return theta;
}

}  // namespace

TEST_CASE("build_unit_psi examples") {
  const UnitPartition single = rows_of({{"Y", {4}}});
  const UnitPsi psi = build_unit_psi(mean_spec("Y"), single.units[0]);
  CHECK(psi(vec({4}))[0] == 0.0);

  // One cluster whose row contributions are summed.
  UnitPartition cluster = partition_units(numeric_dataset({{"g", {1, 1, 1}}, {"Y", {1, 2, 3}}}),
                                         std::string("g"));
  REQUIRE(cluster.m() == 1);
  CHECK(build_unit_psi(mean_spec("Y"), cluster.units[0])(vec({2}))[0] == 0.0);

  const UnitPartition y5 = rows_of({{"Y1", {5}}});
  CHECK(build_unit_psi(moments_spec("Y1"), y5.units[0])(vec({5, 0})) == vec({0, 0}));
}

TEST_CASE("build_unit_psi names a missing column") {
  const UnitPartition part = rows_of({{"X", {1}}});
  try {
    build_unit_psi(mean_spec("Y"), part.units[0]);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.column() == "Y");
  }
}

TEST_CASE("sum_psi examples") {
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  CHECK(sum_psi(mean_spec("Y"), part, vec({2})) == vec({0}));
  CHECK(sum_psi(mean_spec("Y"), part, vec({0})) == vec({6}));

  const UnitPartition ratio = rows_of({{"Y1", {2, 4}}, {"Y2", {1, 3}}});
  CHECK(sum_psi(ratio_spec("Y1", "Y2"), ratio, vec({3, 2, 1.5})) == vec({0, 0, 0}));
}

TEST_CASE("sum_psi rejects a wrong-length psi and names the unit") {
  EstimatorSpec bad;
  bad.name = "bad";
  bad.p = 2;
  bad.outer_build = [](const DataUnit& unit, const Args&) -> PsiFn {
    const bool short_output = unit.id == "1";
    return [short_output](const Vector& theta, const Args&) -> Vector {
      return short_output ? Vector(Vector::Zero(1)) : Vector(theta);
    };
  };
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  try {
    sum_psi(bad, part, vec({0, 0}));
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("'1'") != std::string::npos);
  }
}

TEST_CASE("sum_psi rejects a theta of the wrong length") {
  const UnitPartition part = rows_of({{"Y", {1, 2, 3}}});
  CHECK_THROWS_AS(sum_psi(mean_spec("Y"), part, vec({1, 2})), ArgumentError);
}

TEST_CASE("output length and purity hold for every built-in spec over random theta") {
  std::mt19937_64 rng(99);
  for (const auto& c : builtin_cases()) {
    CAPTURE(c.label);
    const std::vector<UnitPsi> psis = build_unit_psis(c.spec, c.partition);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector theta = random_theta(rng, c.spec.input_dim());
      for (std::size_t i = 0; i < psis.size(); i += 7) {
        const Vector a = psis[i](theta);
        const Vector b = psis[i](theta);
        REQUIRE(a.size() == c.spec.p);
        for (Index k = 0; k < a.size(); ++k) {
          // Bitwise identical, NaN included.
          REQUIRE(std::memcmp(&a[k], &b[k], sizeof(double)) == 0);
        }
      }
    }
  }
}

TEST_CASE("partition additivity: regrouping units into super-units keeps the sum") {
  Dataset ds = gen_geexex(70, 8);
  std::vector<double> group(ds.n_rows());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<double>(i % 7);
  ds.add_numeric("g", group);
  const UnitPartition rows = partition_units(ds);
  const UnitPartition groups = partition_units(ds, std::string("g"));
  const ModelSpec lin{ModelKind::linear, "Y4", {"X1", "X2"}, true, std::nullopt};

  std::mt19937_64 rng(5);
  for (const EstimatorSpec& spec : {moments_spec("Y1"), ratio_spec("Y1", "Y2"),
                                    linear_score_spec(lin)}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vector theta = random_theta(rng, spec.p);
      const Vector a = sum_psi(spec, rows, theta);
      Vector b = Vector::Zero(spec.p);
      for (const auto& unit : groups.units) {
        UnitPartition one;
        one.units.push_back(unit);
        b += sum_psi(spec, one, theta);
      }
      REQUIRE(max_rel_diff(b, a) < 1e-12);
      REQUIRE(max_rel_diff(sum_psi(spec, groups, theta), a) < 1e-12);
    }
  }
}

TEST_CASE("stack of two means vanishes at the two sample means") {
  const UnitPartition part = rows_of({{"Y1", {1, 4, 7}}, {"Y2", {2, 2, 5}}});
  const EstimatorSpec s = stack({mean_spec("Y1"), mean_spec("Y2")});
  CHECK(s.p == 2);
  CHECK(sum_psi(s, part, vec({4, 3})) == vec({0, 0}));
}

TEST_CASE("stacking a single spec is the identity") {
  const UnitPartition part = partition_units(gen_geexex(30, 2));
  const EstimatorSpec base = ratio_spec("Y1", "Y2");
  const EstimatorSpec stacked = stack({base});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector theta = random_theta(rng, 3);
    REQUIRE(sum_psi(stacked, part, theta) == sum_psi(base, part, theta));
  }
}

TEST_CASE("stacked blocks ignore foreign theta slices") {
  const UnitPartition part = partition_units(gen_geexex(30, 9));
  const ModelSpec lin{ModelKind::linear, "Y4", {"X1"}, true, std::nullopt};
  const EstimatorSpec s = stack({moments_spec("Y1"), ratio_spec("Y1", "Y2"),
                                 linear_score_spec(lin)});
  REQUIRE(s.p == 7);
  const std::vector<IndexRange> blocks{{0, 2}, {2, 3}, {5, 2}};
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector theta = random_theta(rng, s.p);
    const Vector base = sum_psi(s, part, theta);
    for (const auto& own : blocks) {
      Vector perturbed = theta;
      for (const auto& other : blocks) {
        if (other.offset == own.offset) continue;
        perturbed.segment(other.offset, other.length) += random_theta(rng, other.length);
      }
      const Vector moved = sum_psi(s, part, perturbed);
      REQUIRE(moved.segment(own.offset, own.length) == base.segment(own.offset, own.length));
    }
  }
}

TEST_CASE("stack layout validation") {
  const EstimatorSpec a = mean_spec("Y");
  const EstimatorSpec b = moments_spec("Y");
  CHECK_THROWS_AS(stack({StackBlock{a, {0, 1}}, StackBlock{b, {2, 2}}}), LayoutError);
  CHECK_THROWS_AS(stack({StackBlock{a, {0, 1}}, StackBlock{b, {0, 2}}}), LayoutError);
  CHECK_THROWS_AS(stack({StackBlock{a, {0, 2}}}), LayoutError);
  CHECK_THROWS_AS(stack(std::vector<StackBlock>{}), LayoutError);
  CHECK_NOTHROW(stack({StackBlock{b, {1, 2}}, StackBlock{a, {0, 1}}}));
}

TEST_CASE("doubly robust stack has thirteen parameters for the standard models") {
  const ModelSpec ps{ModelKind::logistic, "Z", {"X1", "X2", "X3"}, true, std::nullopt};
  const ModelSpec out{ModelKind::linear, "Y", {"X1", "X2", "X3"}, true, std::nullopt};
  const EstimatorSpec s = doubly_robust_spec(ps, out, out);
  CHECK(s.p == 13);
  const DoublyRobustLayout layout = doubly_robust_layout(ps, out, out);
  CHECK(layout.delta == 12);
  CHECK(layout.outcome1.offset == 8);
}

TEST_CASE("arg helpers") {
  const Args args{{"b", 0.5}, {"lag", std::int64_t{3}}, {"name", std::string("x")}};
  CHECK(arg_real(args, "b") == 0.5);
  CHECK(arg_real(args, "lag") == 3.0);
  CHECK(arg_int(args, "lag") == 3);
  CHECK_THROWS_AS(arg_real(args, "name"), ArgumentError);
  CHECK_THROWS_AS(arg_real(args, "missing"), ArgumentError);
}
