// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_FLOW_AVERAGE_HPP
#define TORFACT_FLOW_AVERAGE_HPP

#include <cmath>
#include <vector>

#include "torfact/chart.hpp"
#include "torfact/frame.hpp"
#include "torfact/hyperbolic.hpp"
#include "torfact/linearize.hpp"

namespace torfact {

/// The averaged transport operator attached to the scaled flow e^{aX}:
///
///   (A b)(x) = int_0^1 exp( -int_0^t <da,X>(e^{tau aX} x) dtau )
///              b(e^{t aX} x) dt,
///
/// the coefficient form of the derivative of a |-> e^{aX}.  The inner
/// integral rides along the same trajectory sweep; the outer integral is
/// composite Simpson over the stored quadrature nodes.
inline GridFunction flow_average(const GridFunction& a, const VectorField& X,
                                 const GridFunction& b,
                                 const FlowConfig& cfg = {}) {
  const int d = X.dim();
  GridFunction g = GridFunction::zeros(d, X.shape());
  for (int k = 0; k < d; ++k) g = g + a.derivative(k) * X.comp(k);
  const VectorField aX = a * X;
  FastField F(aX);
  FastScalar gf(g), bf(b);
  const int panels =
      std::max(64, cfg.steps(aX.c0_norm(), 1.0, X.shape(), d) / 2);
  const int count = 2 * panels + 1;
  const int n1 = X.shape()[0], n2 = d == 2 ? X.shape()[1] : 1;
  std::vector<double> out((size_t)n1 * n2);
  std::vector<Pt> path;
  std::vector<double> inner;
  std::vector<double> vals(count);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const Pt p0{kTau * i / n1, kTau * j / n2};
      point_flow_path(F, &gf, p0, 1.0, count, 2, d, &path, &inner);
      for (int t = 0; t < count; ++t)
        vals[t] = std::exp(-inner[t]) * bf.eval(path[t]);
      out[(size_t)i * n2 + j] = detail::simpson(vals, 1.0 / (count - 1));
    }
  }
  return GridFunction::from_samples(d, X.shape(), std::move(out));
}

/// Derivative of a |-> e^{aX} at a in direction b, as the displacement-rate
/// field V(x) = (A b)(x) * w(e^{aX}x) * X(e^{aX}x) with w the pushforward
/// weight of the full flow.
inline VectorField flow_derivative(const GridFunction& a, const VectorField& X,
                                   const GridFunction& b,
                                   const FlowConfig& cfg = {}) {
  const int d = X.dim();
  const GridFunction ab = flow_average(a, X, b, cfg);
  const GridFunction w = pushforward_factor_along_scaled_flow(a, X, 1.0, cfg);
  const DiffeoGrid phi = scaled_flow(a, X, cfg);
  FastScalar wf(w);
  FastField Xf(X);
  const int n1 = X.shape()[0], n2 = d == 2 ? X.shape()[1] : 1;
  std::vector<std::vector<double>> out(d, std::vector<double>((size_t)n1 * n2));
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const size_t idx = (size_t)i * n2 + j;
      Pt p{kTau * i / n1, kTau * j / n2};
      for (int c = 0; c < d; ++c) p[c] += phi.displacement(c).samples()[idx];
      const double wv = wf.eval(p);
      const Pt Xv = Xf.eval(p);
      for (int c = 0; c < d; ++c) out[c][idx] = ab.samples()[idx] * wv * Xv[c];
    }
  }
  std::vector<GridFunction> comps;
  for (int c = 0; c < d; ++c)
    comps.push_back(GridFunction::from_samples(d, X.shape(), std::move(out[c])));
  return VectorField(std::move(comps));
}

/// Geometry of one local working box around the base point.
struct LocalChartSpec {
  Pt q{0.0, 0.0};
  double L1 = 1.0;        // flow-time half-extent
  double L2 = 1.0;        // transversal half-extent
  int m1 = 129;
  int m2 = 33;
  double chi_plateau = 0.74;  // output cut-off, fractions of the extents
  double chi_zero = 0.92;
  double support_radius = 1.5;  // torus ball that bounds all chart images
  double pushforward_tol = 1e-8;
};

struct InverseAverageDiagnostics {
  double alpha_sup = 0.0;
  double slice_residual = 0.0;
  double pushforward_residual = 0.0;
};

/// Weak-coupling inverse: for |a|_C1 well below the hyperbolicity margin,
/// A(a,X) = I + E with |E| = O(|a|_C1), and the operator Neumann series
/// b = sum_k (I - A)^k c converges; no chart is needed.
inline GridFunction flow_average_inverse_weak(const GridFunction& a,
                                              const VectorField& X,
                                              const GridFunction& c,
                                              const FlowConfig& cfg = {},
                                              double tol = 1e-10,
                                              int max_terms = 12) {
  GridFunction acc = c;
  GridFunction term = c;
  for (int k = 0; k < max_terms; ++k) {
    term = term - flow_average(a, X, term, cfg);
    acc = acc + term;
    if (term.max_abs() <= tol) return acc;
  }
  throw StageError(Stage::kNeumann,
                   "weak-coupling inverse did not converge (a too large)");
}

/// Solve A(a,X) b = c for b: rectify (flow box + slide), linearize the
/// hyperbolic slice family, invert the averaged transport blockwise, pull
/// back, and cut off at the box margin.  Valid where the cut-off is 1; the
/// defect must be supported there.  Seeds far below the hyperbolicity
/// margin take the weak-coupling route instead.
inline GridFunction flow_average_inverse(const GridFunction& a,
                                         const VectorField& X,
                                         const GridFunction& c,
                                         const LocalChartSpec& spec,
                                         InverseAverageDiagnostics* diag = nullptr) {
  if (a.ck_norm(1) <= 0.02) {
    if (diag) *diag = InverseAverageDiagnostics{};
    return flow_average_inverse_weak(a, X, c);
  }
  ChartParams prm;
  prm.L1 = spec.L1;
  prm.L2 = spec.L2;
  prm.m1 = spec.m1;
  prm.m2 = spec.m2;
  RectifiedChart chart = RectifiedChart::build(X, spec.q, &a, prm);
  const double pf = chart.validate_pushforward(X);
  if (!(pf <= spec.pushforward_tol))
    throw StageError(Stage::kRectify,
                     "pushforward invariant failed: " + std::to_string(pf));
  const double sr = chart.slice_residual(a);
  if (!(sr <= 1e-8))
    throw StageError(Stage::kRectify,
                     "slide invariant failed: " + std::to_string(sr));

  const int dim0 = X.dim();
  auto x_derivative = [&](const GridFunction& f) {
    GridFunction g = GridFunction::zeros(dim0, X.shape());
    for (int k = 0; k < dim0; ++k) g = g + f.derivative(k) * X.comp(k);
    return g;
  };
  const BoxFunction a_box = chart.pull_scalar(a);
  const BoxFunction ap_box = chart.pull_scalar(x_derivative(a));
  LinearizedField lf = LinearizedField::build(a_box, 1e-6, &ap_box);
  const BoxFunction c_box = chart.pull_scalar(c);
  const BoxFunction cp_box = chart.pull_scalar(x_derivative(c));
  const auto [c_lin, dc_lin] = lf.to_linear_pair(c_box, cp_box);
  const BoxFunction b_lin =
      hyperbolic_average_inverse(lf.alpha(), c_lin, 1e-12, &dc_lin);
  const BoxFunction b_box = lf.from_linear(b_lin);

  if (diag) {
    diag->alpha_sup = lf.alpha().max();
    diag->slice_residual = sr;
    diag->pushforward_residual = pf;
  }

  // Pull back to the torus with the margin cut-off.
  const int dim = X.dim();
  const double p1 = spec.chi_plateau * spec.L1, z1 = spec.chi_zero * spec.L1;
  const double p2 = spec.chi_plateau * spec.L2, z2 = spec.chi_zero * spec.L2;
  return GridFunction::sample(dim, X.shape(), [&](Pt p) {
    bool near = true;
    for (int k = 0; k < dim; ++k)
      if (std::abs(wrap_delta(p[k] - spec.q[k])) > spec.support_radius)
        near = false;
    if (!near) return 0.0;
    double x1, y;
    if (!chart.inverse(p, &x1, &y)) return 0.0;
    double chi = plateau_profile(std::abs(x1), p1, z1);
    if (dim == 2) chi *= plateau_profile(std::abs(y), p2, z2);
    if (chi == 0.0) return 0.0;
    return chi * b_box.eval(x1, dim == 2 ? y : 0.0);
  });
}

/// The analytic differential of Phi(b_1..b_n) = e^{b1 X1} o ... o e^{bn Xn}
/// in directions delta, as a defect field on the torus:
///   V = sum_i (C_i)_* ( (A_i delta_i) X_i ),  C_i = e^{b1X1} o..o e^{biXi}.
inline VectorField forward_dphi(const std::vector<GridFunction>& b,
                                const Frame& frame,
                                const std::vector<GridFunction>& delta,
                                const FlowConfig& cfg = {}) {
  const int n = frame.dim();
  const int d = frame.X.at(0).dim();
  std::vector<GridFunction> comps(
      (size_t)d, GridFunction::zeros(d, frame.X[0].shape()));
  DiffeoGrid C = DiffeoGrid::identity(d, frame.X[0].shape());
  for (int i = 0; i < n; ++i) {
    C = compose(C, scaled_flow(b[i], frame.X[i], cfg));
    const GridFunction ai = flow_average(b[i], frame.X[i], delta[i], cfg);
    const VectorField term = pushforward(C, ai * frame.X[i]);
    for (int k = 0; k < d; ++k) comps[k] = comps[k] + term.comp(k);
  }
  return VectorField(std::move(comps));
}

namespace detail {

/// Pointwise 2x2 (or 1x1) frame decomposition V = sum g_i Y_i inside the
/// working ball; zero outside.  Rejects ill-conditioned frames.
inline std::vector<GridFunction> frame_coordinates(
    const std::vector<VectorField>& Y, const VectorField& V, Pt q,
    double radius, double cond_cap = 1e6) {
  const int n = (int)Y.size();
  const int d = V.dim();
  const int n1 = V.shape()[0], n2 = d == 2 ? V.shape()[1] : 1;
  std::vector<std::vector<double>> g(n, std::vector<double>((size_t)n1 * n2, 0.0));
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const size_t idx = (size_t)i * n2 + j;
      const Pt p{kTau * i / n1, kTau * j / n2};
      bool inside = true;
      for (int k = 0; k < d; ++k)
        if (std::abs(wrap_delta(p[k] - q[k])) > radius) inside = false;
      if (!inside) continue;
      if (n == 1) {
        const double yx = Y[0].comp(0).samples()[idx];
        const double yy = d == 2 ? Y[0].comp(1).samples()[idx] : 0.0;
        const double vx = V.comp(0).samples()[idx];
        const double vy = d == 2 ? V.comp(1).samples()[idx] : 0.0;
        const double denom = yx * yx + yy * yy;
        if (denom < 1e-18)
          throw StageError(Stage::kFrame, "frame degenerates in the ball");
        g[0][idx] = (vx * yx + vy * yy) / denom;
      } else {
        const double a00 = Y[0].comp(0).samples()[idx];
        const double a10 = Y[0].comp(1).samples()[idx];
        const double a01 = Y[1].comp(0).samples()[idx];
        const double a11 = Y[1].comp(1).samples()[idx];
        const double det = a00 * a11 - a01 * a10;
        // cond estimate via Frobenius norm
        const double fro2 = a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11;
        if (std::abs(det) * cond_cap < fro2)
          throw StageError(Stage::kFrame,
                           "frame condition number exceeds the cap");
        const double vx = V.comp(0).samples()[idx];
        const double vy = V.comp(1).samples()[idx];
        g[0][idx] = (vx * a11 - vy * a01) / det;
        g[1][idx] = (vy * a00 - vx * a10) / det;
      }
    }
  }
  std::vector<GridFunction> out;
  for (int i = 0; i < n; ++i)
    out.push_back(GridFunction::from_samples(d, V.shape(), std::move(g[i])));
  return out;
}

}  // namespace detail

/// Invert the differential of Phi at b: given a defect field V, produce
/// delta with D_b Phi [delta] ~ V by peeling factors: decompose V in the
/// moving frame Y_i = (C_i)_* X_i, undo the close-to-identity change of
/// variables (composition with C_i), and invert each averaged transport.
inline std::vector<GridFunction> inverse_dphi(
    const std::vector<GridFunction>& b, const Frame& frame,
    const VectorField& V, const std::vector<LocalChartSpec>& specs,
    const FlowConfig& cfg = {}, double small_b_c1 = 1e-8) {
  const int n = frame.dim();
  const int d = V.dim();
  std::vector<DiffeoGrid> C;
  std::vector<VectorField> Y;
  DiffeoGrid acc = DiffeoGrid::identity(d, V.shape());
  for (int i = 0; i < n; ++i) {
    acc = compose(acc, scaled_flow(b[i], frame.X[i], cfg));
    C.push_back(acc);
    Y.push_back(pushforward(acc, frame.X[i]));
  }
  const double radius = specs.at(0).support_radius;
  std::vector<GridFunction> g =
      detail::frame_coordinates(Y, V, frame.q, radius);
  std::vector<GridFunction> delta;
  for (int i = 0; i < n; ++i) {
    const GridFunction h = compose_with_map(g[i], C[i]);
    if (b[i].ck_norm(1) <= small_b_c1) {
      delta.push_back(h);  // A(0, X) is the identity
    } else {
      delta.push_back(flow_average_inverse(b[i], frame.X[i], h, specs.at(i)));
    }
  }
  return delta;
}

}  // namespace torfact

#endif  // TORFACT_FLOW_AVERAGE_HPP
