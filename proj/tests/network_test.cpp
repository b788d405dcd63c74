#include <cmath>
#include <random>

#include "doctest.h"
#include "gridcase/network.hpp"
#include "test_support.hpp"

using namespace gridcase;

TEST_CASE("three-bus network is structurally sound") {
  CHECK(validate(testing::three_bus()).empty());
}

TEST_CASE("self loop is reported against its branch") {
  Network net = testing::three_bus();
  net.branches[1].to_bus = net.branches[1].from_bus;
  auto violations = validate(net);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].element == Violation::Element::branch);
  CHECK(violations[0].index == 1);
  CHECK(violations[0].kind == "self_loop");
}

TEST_CASE("generator on a missing bus is reported") {
  Network net = testing::three_bus();
  net.generators[0].bus = 99;
  auto violations = validate(net);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].element == Violation::Element::generator);
  CHECK(violations[0].kind == "dangling");
}

TEST_CASE("validate reports every broken invariant without throwing") {
  Network net;
  net.base_mva = -5.0;
  net.buses = {{.id = 1, .v_min = 1.2, .v_max = 1.0}, {.id = 1}};
  net.branches = {{.from_bus = 1, .to_bus = 7, .x = 0.0, .tap = 0.0, .angle_min = 0.1}};
  net.generators = {{.bus = 1, .p_min = 2.0, .p_max = 1.0, .cost = {-1.0, 0.0, 0.0}}};
  std::vector<Violation> violations;
  CHECK_NOTHROW(violations = validate(net));
  CHECK(violations.size() == 9);
}

TEST_CASE("per-unit conversion") {
  CHECK(to_per_unit(100.0, 100.0) == 1.0);
  CHECK(to_per_unit(1.0, 100.0) == doctest::Approx(0.01));
  CHECK_THROWS_AS(to_per_unit(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(from_per_unit(1.0, -3.0), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(-1e4, 1e4);
  std::uniform_real_distribution<double> base(1.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    double x = value(rng);
    double b = base(rng);
    CHECK(from_per_unit(to_per_unit(x, b), b) == doctest::Approx(x).epsilon(1e-15));
  }
}

TEST_CASE("admittance magnitude satisfies y^2 (r^2 + x^2) = 1") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> imp(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    Branch br{.r = imp(rng), .x = imp(rng)};
    double y = br.admittance_magnitude();
    CHECK(y * y * (br.r * br.r + br.x * br.x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fuel labels") {
  CHECK(parse_fuel_label("nuc") == FuelCategory::nuc);
  CHECK(parse_fuel_label("SYNC") == FuelCategory::sync);
  CHECK_FALSE(parse_fuel_label("coal").has_value());
  CHECK(to_string(FuelCategory::pel) == "PEL");
}
