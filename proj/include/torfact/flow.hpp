// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_FLOW_HPP
#define TORFACT_FLOW_HPP

#include <cmath>
#include <vector>

#include "torfact/diffeo.hpp"
#include "torfact/fast_eval.hpp"
#include "torfact/grid.hpp"
#include "torfact/vector_field.hpp"

namespace torfact {

/// Classical fixed-step RK4 configuration.  The step rule is part of the
/// contract: steps = max(min_steps, ceil(steps_per_unit * |X|_C0 * |t| *
/// 2pi/h_min)) with h_min the finest grid spacing.
struct FlowConfig {
  int min_steps = 32;
  double steps_per_unit = 16.0;

  int steps(double field_c0, double t, std::array<int, 2> shape,
            int dim) const {
    const int nmax = dim == 2 ? std::max(shape[0], shape[1]) : shape[0];
    const double need = steps_per_unit * field_c0 * std::abs(t) * nmax;
    return std::max(min_steps, (int)std::ceil(need));
  }
};

namespace detail {

inline Pt rk4_step(const FastField& F, Pt p, double h, int d) {
  Pt k1 = F.eval(p);
  Pt q{p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]};
  Pt k2 = F.eval(q);
  q = Pt{p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]};
  Pt k3 = F.eval(q);
  q = Pt{p[0] + h * k3[0], p[1] + h * k3[1]};
  Pt k4 = F.eval(q);
  Pt out = p;
  for (int a = 0; a < d; ++a)
    out[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
  return out;
}

inline double simpson(const std::vector<double>& v, double h) {
  // v holds 2m+1 equally spaced values.
  const int n = (int)v.size() - 1;
  double s = v[0] + v[n];
  for (int i = 1; i < n; i += 2) s += 4.0 * v[i];
  for (int i = 2; i < n; i += 2) s += 2.0 * v[i];
  return s * h / 3.0;
}

}  // namespace detail

/// Integrate a single trajectory of the field for time t with fixed-step
/// RK4; `steps` substeps in total.
inline Pt point_flow(const FastField& F, Pt p0, double t, int steps, int dim) {
  const double h = t / steps;
  Pt p = p0;
  for (int s = 0; s < steps; ++s) p = detail::rk4_step(F, p, h, dim);
  return p;
}

/// Trajectory positions at `count` equally spaced times in [0, t], together
/// with the running integral of `g` along the trajectory (integrated with
/// the same RK4 sweep).
inline void point_flow_path(const FastField& F, const FastScalar* g, Pt p0,
                            double t, int count, int substeps, int dim,
                            std::vector<Pt>* path, std::vector<double>* integ) {
  path->resize(count);
  if (integ) integ->resize(count);
  Pt p = p0;
  double acc = 0.0;
  (*path)[0] = p;
  if (integ) (*integ)[0] = 0.0;
  const double dt = t / (count - 1);
  const double h = dt / substeps;
  for (int i = 1; i < count; ++i) {
    for (int s = 0; s < substeps; ++s) {
      if (integ) {
        // Joint RK4 on (position, integral of g).
        Pt k1 = F.eval(p);
        double g1 = g->eval(p);
        Pt q{p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]};
        Pt k2 = F.eval(q);
        double g2 = g->eval(q);
        q = Pt{p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]};
        Pt k3 = F.eval(q);
        double g3 = g->eval(q);
        q = Pt{p[0] + h * k3[0], p[1] + h * k3[1]};
        Pt k4 = F.eval(q);
        double g4 = g->eval(q);
        for (int a = 0; a < dim; ++a)
          p[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        acc += h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
      } else {
        p = detail::rk4_step(F, p, h, dim);
      }
    }
    (*path)[i] = p;
    if (integ) (*integ)[i] = acc;
  }
}

/// Time-t flow of X as a DiffeoGrid.  t = 0 returns the identity exactly.
/// Rejects results whose Jacobian positivity fails (field too strong for the
/// near-identity representation).
inline DiffeoGrid flow(const VectorField& X, double t,
                       const FlowConfig& cfg = {}) {
  const int d = X.dim();
  if (t == 0.0) return DiffeoGrid::identity(d, X.shape());
  const int steps = cfg.steps(X.c0_norm(), t, X.shape(), d);
  const double h = t / steps;
  FastField F(X);
  const int n1 = X.shape()[0], n2 = d == 2 ? X.shape()[1] : 1;
  std::vector<std::vector<double>> disp(d, std::vector<double>((size_t)n1 * n2));
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      Pt p0{kTau * i / n1, kTau * j / n2};
      Pt p = p0;
      for (int s = 0; s < steps; ++s) p = detail::rk4_step(F, p, h, d);
      for (int a = 0; a < d; ++a)
        disp[a][(size_t)i * n2 + j] = wrap_delta(p[a] - p0[a]);
    }
  }
  std::vector<GridFunction> comps;
  for (int a = 0; a < d; ++a)
    comps.push_back(GridFunction::from_samples(d, X.shape(), std::move(disp[a])));
  try {
    return DiffeoGrid::from_displacement(std::move(comps));
  } catch (const StageError&) {
    throw StageError(Stage::kFlow,
                     "flow map failed Jacobian positivity (step too large or "
                     "field too strong)");
  }
}

/// One primitive move e^{bX}: the time-1 flow of the rescaled field b*X.
inline DiffeoGrid scaled_flow(const GridFunction& b, const VectorField& X,
                              const FlowConfig& cfg = {}) {
  return flow(b * X, 1.0, cfg);
}

/// Pushforward (phi_* X)(y) = Dphi(phi^{-1}(y)) X(phi^{-1}(y)).
inline VectorField pushforward(const DiffeoGrid& phi, const VectorField& X) {
  if (phi.dim() != X.dim())
    throw StageError(Stage::kInput, "pushforward: dim mismatch");
  const int d = X.dim();
  const int n1 = phi.shape()[0], n2 = d == 2 ? phi.shape()[1] : 1;
  FastField Xf(X);
  FastJacobian Dd(VectorField(phi.displacement()));
  std::vector<std::vector<double>> out(d, std::vector<double>((size_t)n1 * n2));
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const Pt y{kTau * i / n1, kTau * j / n2};
      const Pt x = phi.invert_point(y);
      double J[2][2];
      Dd.eval(x, J);
      for (int a = 0; a < d; ++a) J[a][a] += 1.0;
      const Pt v = Xf.eval(x);
      for (int a = 0; a < d; ++a) {
        double s = 0.0;
        for (int b = 0; b < d; ++b) s += J[a][b] * v[b];
        out[a][(size_t)i * n2 + j] = s;
      }
    }
  }
  std::vector<GridFunction> comps;
  for (int a = 0; a < d; ++a)
    comps.push_back(
        GridFunction::from_samples(d, phi.shape(), std::move(out[a])));
  return VectorField(std::move(comps));
}

/// The scalar factor of the pushforward of X along the time-t flow of a*X:
/// (e^{t aX})_* X = factor * X with
/// factor(x) = exp(int_0^t <da, X>(e^{-tau aX} x) dtau).
inline GridFunction pushforward_factor_along_scaled_flow(
    const GridFunction& a, const VectorField& X, double t,
    const FlowConfig& cfg = {}) {
  const int d = X.dim();
  GridFunction g = GridFunction::zeros(d, X.shape());
  for (int b = 0; b < d; ++b) g = g + a.derivative(b) * X.comp(b);
  const VectorField back = -1.0 * (a * X);
  FastField Fb(back);
  FastScalar gf(g);
  const int panels = std::max(64, cfg.steps(back.c0_norm(), t, X.shape(), d) / 2);
  const int count = 2 * panels + 1;
  const int n1 = X.shape()[0], n2 = d == 2 ? X.shape()[1] : 1;
  std::vector<double> out((size_t)n1 * n2);
  std::vector<Pt> path;
  std::vector<double> integ;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const Pt p0{kTau * i / n1, kTau * j / n2};
      point_flow_path(Fb, &gf, p0, t, count, 2, d, &path, &integ);
      out[(size_t)i * n2 + j] = std::exp(integ.back());
    }
  }
  return GridFunction::from_samples(d, X.shape(), std::move(out));
}

}  // namespace torfact

#endif  // TORFACT_FLOW_HPP
