// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_CHART_HPP
#define TORFACT_CHART_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "torfact/box.hpp"
#include "torfact/flow.hpp"

namespace torfact {

struct ChartParams {
  double L1 = 1.0;   // flow-time half-extent of the box
  double L2 = 1.0;   // transversal half-extent (ignored in 1-D)
  int m1 = 129;      // box nodes along the flow (odd)
  int m2 = 33;       // box nodes along the transversal (odd)
  double min_speed_ratio = 0.2;  // reject slices where |X| collapses
};

/// Flow-box coordinates at a base point q for a nonvanishing field X:
/// Psi(x1, y) = e^{(x1 + s0(y)) X}(q + y e), with e a unit transversal and
/// s0(y) the per-slice shift that places the x1-origin on the zero set of a
/// given function a (so a(Psi(0, y)) = 0).  In these coordinates the
/// pushforward of X is the first coordinate field.
///
/// Position tables are stored unwrapped (real coordinates along the
/// trajectory) so interpolation across the periodic seam stays smooth.
class RectifiedChart {
 public:
  /// Builds the chart; `a` may be null (no slide, s0 = 0: plain flow-box).
  /// Throws StageError(kRectify) when X vanishes or degenerates on the box,
  /// when the slide leaves the box, or when the pushforward invariant fails.
  static RectifiedChart build(const VectorField& X, Pt q,
                              const GridFunction* a, const ChartParams& prm) {
    RectifiedChart ch;
    ch.dim_ = X.dim();
    ch.q_ = q;
    ch.prm_ = prm;
    if (ch.dim_ == 1) ch.prm_.m2 = 1;
    const Pt v0 = X.evaluate(q);
    const double speed0 = std::hypot(v0[0], ch.dim_ == 2 ? v0[1] : 0.0);
    if (!(speed0 > 1e-10))
      throw StageError(Stage::kRectify, "X vanishes at the base point");
    ch.e_ = ch.dim_ == 2
                ? Pt{-v0[1] / speed0, v0[0] / speed0}
                : Pt{0.0, 0.0};

    FastField F(X);
    const int m1 = ch.prm_.m1, m2 = ch.prm_.m2;
    const double L1 = prm.L1;
    // Integrate each slice on a denser parameter grid with slack at both
    // ends, so the slide can be applied by interpolation.
    const double slack = 0.35 * L1 + 0.05;
    const double Lpath = L1 + slack;
    const int mpath = 2 * (2 * m1) + 1;  // dense and odd
    std::vector<std::vector<Pt>> paths(m2);
    const double hpath = 2.0 * Lpath / (mpath - 1);
    const int sub = std::max(
        3, (int)std::ceil(16.0 * X.c0_norm() *
                          (ch.dim_ == 2
                               ? std::max(X.shape()[0], X.shape()[1])
                               : X.shape()[0]) *
                          hpath));
    for (int j = 0; j < m2; ++j) {
      const double y =
          ch.dim_ == 2 ? -prm.L2 + 2.0 * prm.L2 * j / (m2 - 1) : 0.0;
      const Pt start{q[0] + y * ch.e_[0], q[1] + y * ch.e_[1]};
      auto& path = paths[j];
      path.resize(mpath);
      const int c = mpath / 2;
      path[c] = start;
      Pt p = start;
      for (int k = c + 1; k < mpath; ++k) {
        for (int s = 0; s < sub; ++s)
          p = detail::rk4_step(F, p, hpath / sub, ch.dim_);
        path[k] = p;
      }
      p = start;
      for (int k = c - 1; k >= 0; --k) {
        for (int s = 0; s < sub; ++s)
          p = detail::rk4_step(F, p, -hpath / sub, ch.dim_);
        path[k] = p;
      }
    }

    // Per-slice origin shift onto the zero set of a.
    std::vector<double> s0(m2, 0.0);
    if (a != nullptr) {
      for (int j = 0; j < m2; ++j) {
        s0[j] = ch.slide_root(*a, paths[j], Lpath, slack);
      }
    }

    // Resample the paths at x1 + s0(y).
    auto path_at = [&](const std::vector<Pt>& path, double s, int comp) {
      const double t = (s + Lpath) / hpath;
      int i0 = (int)std::floor(t) - 5;
      i0 = std::clamp(i0, 0, mpath - detail::kStencil);
      double w[detail::kStencil];
      detail::lagrange_weights(t - i0, w);
      double acc = 0.0;
      for (int k = 0; k < detail::kStencil; ++k)
        acc += w[k] * path[i0 + k][comp];
      return acc;
    };
    for (int comp = 0; comp < ch.dim_; ++comp) {
      ch.pos_[comp] = BoxFunction::sample(
          ch.dim_, m1, L1, m2, ch.dim_ == 2 ? prm.L2 : 0.0,
          [&](double x1, double y) {
            const int j =
                ch.dim_ == 2
                    ? (int)std::lround((y + prm.L2) * (m2 - 1) / (2.0 * prm.L2))
                    : 0;
            return path_at(paths[j], x1 + s0[j], comp);
          });
    }
    ch.s0_ = ch.dim_ == 2 ? LineFn(std::move(s0), prm.L2)
                          : LineFn::constant(s0[0]);
    for (int comp = 0; comp < ch.dim_; ++comp)
      ch.dpos_dy_[comp] = ch.dim_ == 2 ? ch.pos_[comp].derivative_y(1)
                                       : ch.pos_[comp].zeros_like();
    ch.Xfast_ = F;

    // Degeneracy guard: the speed along every stored slice must stay
    // comparable to the base speed.
    double minspeed = 1e300;
    for (int j = 0; j < m2; ++j)
      for (const Pt& p : paths[j]) {
        const Pt v = F.eval(p);
        minspeed = std::min(minspeed,
                            std::hypot(v[0], ch.dim_ == 2 ? v[1] : 0.0));
      }
    if (minspeed < prm.min_speed_ratio * speed0)
      throw StageError(Stage::kRectify,
                       "field degenerates inside the flow box (use a smaller "
                       "box or a better frame)");
    return ch;
  }

  int dim() const { return dim_; }
  Pt base_point() const { return q_; }
  const ChartParams& params() const { return prm_; }
  double L1() const { return prm_.L1; }
  double L2() const { return dim_ == 2 ? prm_.L2 : 0.0; }
  const LineFn& origin_shift() const { return s0_; }

  Pt forward(double x1, double y = 0.0) const {
    return Pt{pos_[0].eval(x1, y), dim_ == 2 ? pos_[1].eval(x1, y) : 0.0};
  }

  /// Inverse chart lookup by 2-D Newton on the position tables.  Returns
  /// false when p lies outside the box (no throw; callers often probe).
  bool inverse(Pt p, double* x1_out, double* y_out) const {
    const Pt v0 = Xfast_.eval(q_);
    double x1, y;
    {
      // Affine initial guess from the frame (v0, e).
      const double dx = wrap_delta(p[0] - q_[0]);
      const double dy = dim_ == 2 ? wrap_delta(p[1] - q_[1]) : 0.0;
      const double s2 = v0[0] * v0[0] + v0[1] * v0[1];
      x1 = (dx * v0[0] + dy * v0[1]) / s2;
      y = dim_ == 2 ? dx * e_[0] + dy * e_[1] : 0.0;
    }
    const double margin1 = 1.9 * pos_[0].h1();
    const double margin2 =
        dim_ == 2 ? 1.9 * (2.0 * L2() / (prm_.m2 - 1)) : 0.0;
    for (int it = 0; it < 60; ++it) {
      x1 = std::clamp(x1, -L1() - margin1, L1() + margin1);
      if (dim_ == 2) y = std::clamp(y, -L2() - margin2, L2() + margin2);
      Pt r;
      double rmax = 0.0;
      for (int c = 0; c < dim_; ++c) {
        r[c] = wrap_delta(pos_[c].eval(x1, y) - p[c]);
        rmax = std::max(rmax, std::abs(r[c]));
      }
      if (rmax <= 1e-12) {
        if (std::abs(x1) > L1() || (dim_ == 2 && std::abs(y) > L2()))
          return false;
        *x1_out = x1;
        if (y_out) *y_out = y;
        return true;
      }
      // Jacobian columns: d pos/dx1 = X(pos), d pos/dy from the table.
      const Pt here{pos_[0].eval(x1, y),
                    dim_ == 2 ? pos_[1].eval(x1, y) : 0.0};
      const Pt c1 = Xfast_.eval(here);
      if (dim_ == 1) {
        x1 -= r[0] / c1[0];
      } else {
        const double a00 = c1[0], a10 = c1[1];
        const double a01 = dpos_dy_[0].eval(x1, y);
        const double a11 = dpos_dy_[1].eval(x1, y);
        const double det = a00 * a11 - a01 * a10;
        if (std::abs(det) < 1e-14) return false;
        x1 -= (r[0] * a11 - r[1] * a01) / det;
        y -= (r[1] * a00 - r[0] * a10) / det;
      }
    }
    return false;
  }

  /// Sample f along the chart: (f o Psi) on the box.  `exact` uses the full
  /// trigonometric series; otherwise the fast interpolated path.
  BoxFunction pull_scalar(const GridFunction& f, bool exact = false) const {
    const FastScalar fs = exact ? FastScalar() : FastScalar(f);
    return BoxFunction::sample(
        dim_, prm_.m1, prm_.L1, prm_.m2, L2(), [&](double x1, double y) {
          const Pt p{pos_[0].eval(x1, y),
                     dim_ == 2 ? pos_[1].eval(x1, y) : 0.0};
          const Pt w{wrap_angle(p[0]), dim_ == 2 ? wrap_angle(p[1]) : 0.0};
          return exact ? f.evaluate(w) : fs.eval(w);
        });
  }

  /// The x1 coordinate as a function on the torus, multiplied by a cut-off
  /// supported inside the chart image (zero where the inverse fails).
  GridFunction x1_coordinate_times(const GridFunction& cutoff) const {
    return GridFunction::sample(
        cutoff.dim(), cutoff.shape(), [&](Pt p) {
          const double c = cutoff.evaluate(p);
          if (c == 0.0) return 0.0;
          double x1, y;
          if (!inverse(p, &x1, &y))
            throw StageError(Stage::kRectify,
                             "cut-off support escapes the chart box");
          return x1 * c;
        });
  }

  /// Max deviation of the pushforward of the first coordinate field from X
  /// over the box (the rectification invariant).
  double validate_pushforward(const VectorField& X) const {
    FastField F(X);
    double worst = 0.0;
    for (int c = 0; c < dim_; ++c) {
      BoxFunction d1 = pos_[c].derivative_x1(1);
      for (int i = 0; i < prm_.m1; ++i)
        for (int j = 0; j < prm_.m2; ++j) {
          const Pt p{pos_[0].at(i, j), dim_ == 2 ? pos_[1].at(i, j) : 0.0};
          const Pt v = F.eval(Pt{wrap_angle(p[0]),
                                 dim_ == 2 ? wrap_angle(p[1]) : 0.0});
          worst = std::max(worst, std::abs(d1.at(i, j) - v[c]));
        }
    }
    return worst;
  }

  /// |a| on the slice x1 = 0 (the slide invariant).
  double slice_residual(const GridFunction& a) const {
    double worst = 0.0;
    for (int j = 0; j < prm_.m2; ++j) {
      const double y = dim_ == 2 ? -L2() + 2.0 * L2() * j / (prm_.m2 - 1) : 0.0;
      const Pt p = forward(0.0, y);
      worst = std::max(worst, std::abs(a.evaluate(
                                  Pt{wrap_angle(p[0]),
                                     dim_ == 2 ? wrap_angle(p[1]) : 0.0})));
    }
    return worst;
  }

 private:
  double slide_root(const GridFunction& a, const std::vector<Pt>& path,
                    double Lpath, double slack) const {
    auto aval = [&](double s) {
      const double hpath = 2.0 * Lpath / (path.size() - 1);
      const double t = (s + Lpath) / hpath;
      int i0 = (int)std::floor(t) - 5;
      i0 = std::clamp(i0, 0, (int)path.size() - detail::kStencil);
      double w[detail::kStencil];
      detail::lagrange_weights(t - i0, w);
      Pt p{0.0, 0.0};
      for (int k = 0; k < detail::kStencil; ++k) {
        p[0] += w[k] * path[i0 + k][0];
        p[1] += w[k] * path[i0 + k][1];
      }
      return a.evaluate(Pt{wrap_angle(p[0]),
                           dim_ == 2 ? wrap_angle(p[1]) : 0.0});
    };
    // Newton from 0 with secant fallback; the slide root is near 0 by the
    // hyperbolicity hypotheses.
    double s = 0.0, f = aval(0.0);
    for (int it = 0; it < 60; ++it) {
      if (std::abs(f) <= 1e-12) return s;
      const double h = 1e-6;
      const double df = (aval(s + h) - aval(s - h)) / (2.0 * h);
      if (std::abs(df) < 1e-12) break;
      double sn = s - f / df;
      sn = std::clamp(sn, -slack, slack);
      const double fn = aval(sn);
      if (std::abs(fn) >= std::abs(f) && std::abs(f) < 1e-9) return s;
      s = sn;
      f = fn;
    }
    if (std::abs(f) <= 1e-10) return s;
    throw StageError(Stage::kRectify,
                     "slide root-finding failed inside the box");
  }

  int dim_ = 1;
  Pt q_{0.0, 0.0};
  Pt e_{0.0, 0.0};
  ChartParams prm_;
  std::array<BoxFunction, 2> pos_;
  std::array<BoxFunction, 2> dpos_dy_;
  LineFn s0_;
  FastField Xfast_;
};

}  // namespace torfact

#endif  // TORFACT_CHART_HPP
