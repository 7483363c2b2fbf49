// SPDX-License-Identifier: Apache-2.0
//
// The averaged transport operator A(a,X), its chart-based inverse, the
// derivative of the exponential map, and the differential of the factor
// composition with its peeling inverse.  Oracles: closed forms, central
// finite differences of flows, and defining-equation residuals.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "torfact/flow_average.hpp"

using namespace torfact;

namespace {

// Hyperbolic seed -eps * wrapped(x - q) * cutoff on the circle.
GridFunction seed_1d(std::array<int, 2> shape, double q, double eps,
                     double r_in, double r_out) {
  return GridFunction::sample(1, shape, [=](Pt p) {
    const double d = wrap_delta(p[0] - q);
    return -eps * d * plateau_profile(std::abs(d), r_in, r_out);
  });
}

GridFunction bump_at(std::array<int, 2> shape, int dim, Pt q, double r_in,
                     double r_out) {
  return bump(dim, shape, q, r_in, r_out);
}

Frame axis_frame_1d(std::array<int, 2> shape) {
  Frame fr;
  fr.q = Pt{kPi, 0.0};
  fr.witnesses = {FactorList{}};
  fr.field_indices = {0};
  fr.X = {VectorField::constant(1, shape, {1.0, 0.0})};
  return fr;
}

Frame axis_frame_2d(std::array<int, 2> shape, Pt q) {
  Frame fr;
  fr.q = q;
  fr.witnesses = {FactorList{}, FactorList{}};
  fr.field_indices = {0, 1};
  fr.X = {VectorField::constant(2, shape, {1.0, 0.0}),
          VectorField::constant(2, shape, {0.0, 1.0})};
  return fr;
}

}  // namespace

TEST_CASE("averaged transport with a = 0 is the identity") {
  auto X = VectorField::constant(1, {64, 1}, {1.0, 0.0});
  auto z = GridFunction::zeros(1, {64, 1});
  auto b = GridFunction::sample(1, {64, 1},
                                [](Pt p) { return std::cos(2.0 * p[0]); });
  auto ab = flow_average(z, X, b);
  double worst = 0.0;
  for (int i = 0; i < 64; ++i)
    worst = std::max(worst, std::abs(ab.at(i) - b.at(i)));
  REQUIRE(worst <= 1e-12);

  REQUIRE(flow_average(b, X, z).max_abs() == 0.0);
}

TEST_CASE("averaged transport matches the finite-difference exponential") {
  const std::array<int, 2> shape{256, 1};
  auto X = VectorField::constant(1, shape, {1.0, 0.0});
  auto a = seed_1d(shape, kPi, 0.15, 1.0, 2.2);
  auto b = GridFunction::sample(1, shape, [](Pt p) {
    const double d = wrap_delta(p[0] - kPi);
    return std::cos(1.3 * d) * plateau_profile(std::abs(d), 1.0, 2.0);
  });
  auto ab = flow_average(a, X, b);
  const double h = 1e-4;
  auto phip = scaled_flow(a + h * b, X);
  auto phim = scaled_flow(a - h * b, X);
  auto phi = scaled_flow(a, X);
  auto psi = scaled_flow(-1.0 * a, X);
  auto dpsi = psi.displacement(0).derivative(0);
  double worst = 0.0;
  for (int i = 0; i < 256; ++i) {
    const Pt p = a.node(i);
    if (std::abs(wrap_delta(p[0] - kPi)) > 1.5) continue;
    const double V =
        (phip.displacement(0).at(i) - phim.displacement(0).at(i)) / (2.0 * h);
    const double z = wrap_angle(p[0] + phi.displacement(0).at(i));
    const double transported = (1.0 + dpsi.evaluate({z, 0.0})) * V;
    worst = std::max(worst, std::abs(transported - ab.at(i)) /
                                std::max(1.0, std::abs(ab.at(i))));
  }
  REQUIRE(worst <= 1e-5);
}

TEST_CASE("derivative of the exponential map") {
  const std::array<int, 2> shape{64, 1};
  auto X = VectorField::constant(1, shape, {1.0, 0.0});
  auto b = GridFunction::sample(1, shape, [](Pt p) { return std::cos(p[0]); });

  // a = 0: the derivative is b X
  auto V0 = flow_derivative(GridFunction::zeros(1, shape), X, b);
  double worst = 0.0;
  for (int i = 0; i < 64; ++i)
    worst = std::max(worst, std::abs(V0.comp(0).at(i) - b.at(i)));
  REQUIRE(worst <= 1e-12);

  // b = 0: zero perturbation
  auto a = GridFunction::sample(1, shape,
                                [](Pt p) { return -0.1 * std::sin(p[0]); });
  REQUIRE(flow_derivative(a, X, GridFunction::zeros(1, shape))
              .comp(0)
              .max_abs() == 0.0);

  // central finite difference at h = 1e-4
  auto V = flow_derivative(a, X, b);
  const double h = 1e-4;
  auto phip = scaled_flow(a + h * b, X);
  auto phim = scaled_flow(a - h * b, X);
  worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double fd =
        (phip.displacement(0).at(i) - phim.displacement(0).at(i)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - V.comp(0).at(i)));
  }
  REQUIRE(worst <= 1e-6);
}

TEST_CASE("derivative of the exponential map converges at second order") {
  const std::array<int, 2> shape{64, 1};
  auto X = VectorField::constant(1, shape, {1.0, 0.0});
  auto a = GridFunction::sample(1, shape,
                                [](Pt p) { return -0.1 * std::sin(p[0]); });
  auto b = GridFunction::sample(1, shape, [](Pt p) { return std::cos(p[0]); });
  auto V = flow_derivative(a, X, b);
  auto err_at = [&](double h) {
    auto phip = scaled_flow(a + h * b, X);
    auto phim = scaled_flow(a - h * b, X);
    double w = 0.0;
    for (int i = 0; i < 64; ++i) {
      const double fd = (phip.displacement(0).at(i) -
                         phim.displacement(0).at(i)) /
                        (2.0 * h);
      w = std::max(w, std::abs(fd - V.comp(0).at(i)));
    }
    return w;
  };
  const double e1 = err_at(1e-2), e2 = err_at(5e-3), e3 = err_at(2.5e-3);
  REQUIRE(e1 / e2 >= 3.5);
  REQUIRE(e1 / e2 <= 4.5);
  REQUIRE(e2 / e3 >= 3.5);
  REQUIRE(e2 / e3 <= 4.5);
}

TEST_CASE("chart inverse of the averaged transport round trips") {
  const std::array<int, 2> shape{512, 1};
  auto X = VectorField::constant(1, shape, {1.0, 0.0});
  const Pt q{kPi, 0.0};
  // a = -0.2 sin(x - q) near q: hyperbolic seed, vanishing slope at the
  // antipode stays outside the box.
  auto a = GridFunction::sample(1, shape, [&](Pt p) {
    return -0.2 * std::sin(wrap_delta(p[0] - q[0]));
  });
  auto c = GridFunction::sample(1, shape, [&](Pt p) {
    const double d = wrap_delta(p[0] - q[0]);
    return (0.4 + std::sin(2.0 * d)) * plateau_profile(std::abs(d), 0.85, 1.35);
  });
  LocalChartSpec spec;
  spec.q = q;
  spec.L1 = 2.4;
  spec.m1 = 385;
  spec.support_radius = 2.6;
  auto b = flow_average_inverse(a, X, c, spec);
  auto back = flow_average(a, X, b);
  const double clean = spec.chi_plateau * spec.L1 - 0.3;
  double worst = 0.0;
  for (int i = 0; i < 256; ++i) {
    if (std::abs(wrap_delta(a.node(i)[0] - q[0])) > clean) continue;
    worst = std::max(worst, std::abs(back.at(i) - c.at(i)));
  }
  REQUIRE(worst <= 1e-5);

  // c = 0 -> 0
  REQUIRE(flow_average_inverse(a, X, GridFunction::zeros(1, shape), spec)
              .max_abs() <= 1e-14);
}

TEST_CASE("weak seeds invert perturbatively and stay close to the identity") {
  const std::array<int, 2> shape{128, 1};
  auto X = VectorField::constant(1, shape, {1.0, 0.0});
  auto a = GridFunction::sample(1, shape, [&](Pt p) {
    return -1e-3 * std::sin(wrap_delta(p[0] - kPi));
  });
  REQUIRE(a.ck_norm(1) <= 1.1e-3);
  auto c = GridFunction::sample(1, shape, [&](Pt p) {
    const double d = wrap_delta(p[0] - kPi);
    return std::cos(d) * plateau_profile(std::abs(d), 0.8, 1.4);
  });
  LocalChartSpec spec;
  spec.q = Pt{kPi, 0.0};
  spec.L1 = 2.0;
  spec.support_radius = 2.4;
  auto b = flow_average_inverse(a, X, c, spec);
  // defining-equation residual
  auto back = flow_average(a, X, b);
  double worst = 0.0;
  for (int i = 0; i < 128; ++i)
    worst = std::max(worst, std::abs(back.at(i) - c.at(i)));
  REQUIRE(worst <= 1e-9);
  // linear-regime consistency: the inverse deviates from c by O(|a|)
  double dev = 0.0;
  for (int i = 0; i < 128; ++i)
    dev = std::max(dev, std::abs(b.at(i) - c.at(i)));
  REQUIRE(dev <= 1e-2 * c.max_abs());
}

TEST_CASE("differential inverse at the identity jet is frame extraction") {
  const std::array<int, 2> shape{64, 64};
  Frame fr = axis_frame_2d(shape, {kPi, kPi});
  std::vector<GridFunction> zero{GridFunction::zeros(2, shape),
                                 GridFunction::zeros(2, shape)};
  auto g1 = GridFunction::sample(2, shape, [](Pt p) {
    return 0.3 * std::sin(p[0]) * std::cos(p[1]);
  });
  auto g2 = GridFunction::sample(2, shape, [](Pt p) {
    return 0.2 * std::cos(p[0] + p[1]);
  });
  VectorField V({g1 * fr.X[0].comp(0) + g2 * fr.X[1].comp(0),
                 g1 * fr.X[0].comp(1) + g2 * fr.X[1].comp(1)});
  LocalChartSpec spec;
  spec.q = fr.q;
  spec.support_radius = kPi;  // whole torus: the identity case needs no box
  auto delta = inverse_dphi(zero, fr, V, {spec, spec});
  double worst = 0.0;
  for (size_t i = 0; i < g1.size(); ++i) {
    worst = std::max(worst, std::abs(delta[0].samples()[i] - g1.samples()[i]));
    worst = std::max(worst, std::abs(delta[1].samples()[i] - g2.samples()[i]));
  }
  REQUIRE(worst <= 1e-8);
}

TEST_CASE("differential inverse round trips against finite differences, n=1") {
  const std::array<int, 2> shape{512, 1};
  Frame fr = axis_frame_1d(shape);
  const Pt q = fr.q;
  auto a = seed_1d(shape, q[0], 0.1, 1.9, 2.6);
  auto V0 = GridFunction::sample(1, shape, [&](Pt p) {
    const double d = wrap_delta(p[0] - q[0]);
    return (std::sin(1.7 * d) + 0.4 * d) *
           plateau_profile(std::abs(d), 1.1, 1.5);
  });
  VectorField V({V0});
  LocalChartSpec spec;
  spec.q = q;
  spec.L1 = 2.1;
  spec.m1 = 257;
  spec.support_radius = 2.5;
  std::vector<GridFunction> b{a};
  auto delta = inverse_dphi(b, fr, V, {spec});

  // forward-difference the factor map in the recovered direction
  const double h = 1e-4;
  auto plus = compose(scaled_flow(a + h * delta[0], fr.X[0]),
                      DiffeoGrid::identity(1, shape));
  auto minus = scaled_flow(a - h * delta[0], fr.X[0]);
  auto base = scaled_flow(a, fr.X[0]);
  // Measured over the working region: the cut-off plateau minus the flow
  // reach (outside it the localized inverse deviates by construction).
  const double clean = spec.chi_plateau * spec.L1 - 0.3;
  FastScalar Vf(V.comp(0));
  double worst = 0.0, vmax = V.comp(0).max_abs();
  for (int i = 0; i < 128; ++i) {
    if (std::abs(wrap_delta(base.node(i)[0] - q[0])) > clean) continue;
    const double fd =
        (plus.displacement(0).at(i) - minus.displacement(0).at(i)) / (2.0 * h);
    const Pt img{wrap_angle(base.node(i)[0] + base.displacement(0).at(i)), 0.0};
    worst = std::max(worst, std::abs(fd - Vf.eval(img)));
  }
  REQUIRE(worst <= 1e-4 * std::max(1.0, vmax));
}

TEST_CASE("differential inverse round trips against finite differences, n=2") {
  const std::array<int, 2> shape{128, 128};
  const Pt q{kPi, kPi};
  Frame fr = axis_frame_2d(shape, q);
  auto mkseed = [&](int axis) {
    return GridFunction::sample(2, shape, [&, axis](Pt p) {
      const double d = wrap_delta(p[axis] - q[axis]);
      const double dx = std::abs(wrap_delta(p[0] - q[0]));
      const double dy = std::abs(wrap_delta(p[1] - q[1]));
      return -0.1 * d * plateau_profile(dx, 2.6, 3.05) *
             plateau_profile(dy, 2.6, 3.05);
    });
  };
  std::vector<GridFunction> b{mkseed(0), mkseed(1)};
  auto g = GridFunction::sample(2, shape, [&](Pt p) {
    const double dx = wrap_delta(p[0] - q[0]);
    const double dy = wrap_delta(p[1] - q[1]);
    return plateau_profile(std::hypot(dx, dy), 0.5, 1.1);
  });
  VectorField V({GridFunction::sample(2, shape,
                                      [&](Pt p) {
                                        const double dy =
                                            wrap_delta(p[1] - q[1]);
                                        return 0.5 * std::sin(1.3 * dy);
                                      }) *
                     g,
                 GridFunction::sample(2, shape,
                                      [&](Pt p) {
                                        const double dx =
                                            wrap_delta(p[0] - q[0]);
                                        return 0.4 * std::sin(0.9 * dx);
                                      }) *
                     g});
  LocalChartSpec spec;
  spec.q = q;
  spec.L1 = 2.45;
  spec.L2 = 2.45;
  spec.m1 = 193;
  spec.m2 = 97;
  spec.chi_plateau = 0.59;  // wide roll-off: tails must stay resolved on the
  spec.chi_zero = 0.96;     // torus grid when cut
  spec.support_radius = 2.6;
  auto delta = inverse_dphi(b, fr, V, {spec, spec});

  auto phi_of = [&](const std::vector<GridFunction>& bb) {
    return compose(scaled_flow(bb[0], fr.X[0]), scaled_flow(bb[1], fr.X[1]));
  };
  const double h = 2e-4;
  auto plus = phi_of({b[0] + h * delta[0], b[1] + h * delta[1]});
  auto minus = phi_of({b[0] - h * delta[0], b[1] - h * delta[1]});
  auto base = phi_of(b);
  const double clean = spec.chi_plateau * spec.L1 - 0.35;
  FastField Vf(V);
  double worst = 0.0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const Pt p = base.node(i, j);
      if (std::abs(wrap_delta(p[0] - q[0])) > clean ||
          std::abs(wrap_delta(p[1] - q[1])) > clean)
        continue;
      Pt img = base.node_image(i, j);
      const Pt v = Vf.eval(img);
      for (int c = 0; c < 2; ++c) {
        const double fd = (plus.displacement(c).at(i, j) -
                           minus.displacement(c).at(i, j)) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(fd - v[c]));
      }
    }
  REQUIRE(worst <= 1e-3);
}
