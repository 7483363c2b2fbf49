// SPDX-License-Identifier: Apache-2.0
//
// Box-grid calculus: local Lagrange interpolation and one-sided
// finite-difference derivatives on non-periodic working boxes.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "torfact/box.hpp"

using namespace torfact;

TEST_CASE("box interpolation is exact on polynomials") {
  auto f = BoxFunction::sample(2, 33, 0.8, 17, 0.5, [](double x, double y) {
    return 1.0 + x - 2.0 * y + x * x * y - 0.5 * x * x * x + y * y * x * x;
  });
  for (double x : {-0.77, -0.31, 0.0, 0.123, 0.69})
    for (double y : {-0.44, 0.02, 0.41}) {
      const double ex =
          1.0 + x - 2.0 * y + x * x * y - 0.5 * x * x * x + y * y * x * x;
      REQUIRE(std::abs(f.eval(x, y) - ex) <= 1e-12);
    }
}

TEST_CASE("box interpolation of smooth data is high order") {
  auto f = BoxFunction::sample(1, 65, 1.0, 1, 0.0,
                               [](double x, double) { return std::sin(3.0 * x) * std::exp(x); });
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double x = -1.0 + 2.0 * k / 199.0;
    worst = std::max(worst,
                     std::abs(f.eval(x) - std::sin(3.0 * x) * std::exp(x)));
  }
  REQUIRE(worst <= 1e-10);
}

TEST_CASE("box derivatives") {
  auto f = BoxFunction::sample(1, 129, 1.0, 1, 0.0,
                               [](double x, double) { return std::exp(std::sin(2.0 * x)); });
  auto d = f.derivative_x1(1);
  double worst = 0.0;
  for (int i = 0; i < 129; ++i) {
    const double x = f.x1(i);
    const double ex = 2.0 * std::cos(2.0 * x) * std::exp(std::sin(2.0 * x));
    worst = std::max(worst, std::abs(d.at(i) - ex));
  }
  REQUIRE(worst <= 1e-7);

  auto g = BoxFunction::sample(2, 33, 0.7, 17, 0.6,
                               [](double x, double y) { return std::sin(x + 2.0 * y); });
  auto gy = g.derivative_y(1);
  double wy = 0.0;
  for (int i = 0; i < 33; ++i)
    for (int j = 0; j < 17; ++j)
      wy = std::max(wy, std::abs(gy.at(i, j) -
                                 2.0 * std::cos(g.x1(i) + 2.0 * g.y(j))));
  REQUIRE(wy <= 1e-6);
}

TEST_CASE("slice values and derivatives") {
  auto f = BoxFunction::sample(2, 33, 0.7, 17, 0.6, [](double x, double y) {
    return std::cos(y) + x * (1.0 + y) + x * x * 0.5 * std::sin(y);
  });
  auto v = f.slice_values();
  auto d1 = f.slice_derivative(1);
  auto d2 = f.slice_derivative(2);
  for (int j = 0; j < 17; ++j) {
    const double y = f.y(j);
    REQUIRE(std::abs(v.at(j) - std::cos(y)) <= 1e-12);
    REQUIRE(std::abs(d1.at(j) - (1.0 + y)) <= 1e-10);
    REQUIRE(std::abs(d2.at(j) - std::sin(y)) <= 1e-8);
  }
}

TEST_CASE("line functions evaluate and differentiate") {
  std::vector<double> v(17);
  for (int j = 0; j < 17; ++j) {
    const double y = -0.6 + 1.2 * j / 16.0;
    v[j] = std::sin(2.0 * y);
  }
  LineFn g(v, 0.6);
  REQUIRE(std::abs(g.eval(0.1) - std::sin(0.2)) <= 1e-10);
  auto dg = g.derivative();
  REQUIRE(std::abs(dg.eval(-0.2) - 2.0 * std::cos(-0.4)) <= 1e-7);

  auto c = LineFn::constant(3.5);
  REQUIRE(c.eval(99.0) == 3.5);
  REQUIRE(c.derivative().eval(0.0) == 0.0);
}

TEST_CASE("out-of-box evaluation is rejected") {
  auto f = BoxFunction::zeros(1, 33, 0.5, 1, 0.0);
  REQUIRE_THROWS_AS(f.eval(2.0), StageError);
}
