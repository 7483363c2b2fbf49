// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_LINEARIZE_HPP
#define TORFACT_LINEARIZE_HPP

#include <cmath>
#include <vector>

#include "torfact/box.hpp"
#include "torfact/hyperbolic.hpp"

namespace torfact {

/// Smooth linearization of a y-family of hyperbolic 1-D fields
/// a(x1,y) d/dx1 with a(0,y) = 0 and da/dx1(0,y) = alpha(y) <= -alpha_min:
/// the change of variable
///   xi(x1,y) = x1 * exp( int_0^{x1} ( alpha(y)/a(s,y) - 1/s ) ds )
/// conjugates the field to alpha(y) xi d/dxi.  The integrand's removable
/// singularity at s = 0 is patched by a 3-term series from the x1-jet of a
/// at the slice.  Both the map and its inverse are tabulated per slice.
class LinearizedField {
 public:
  /// `aprime` is the exact x1-derivative of a when available (the pullback
  /// of the X-directional derivative); it makes the xi-derivative tables
  /// analytic instead of finite-differenced.
  static LinearizedField build(const BoxFunction& a, double tol_conjugacy = 1e-6,
                               const BoxFunction* aprime = nullptr) {
    LinearizedField lf;
    lf.a_ = a;
    lf.alpha_ = a.slice_derivative(1);
    if (!(lf.alpha_.max() <= -kAlphaMin))
      throw StageError(Stage::kLinearize,
                       "slice rate exceeds the hyperbolicity margin "
                       "(seed too weak: use a smaller box or larger eps)");
    if (a.slice_values().max_abs() > 1e-8)
      throw StageError(Stage::kLinearize, "a does not vanish on the slice");

    const int m1 = a.m1(), m2 = a.m2();
    const int c = m1 / 2;
    const double h = a.h1();
    // Hyperbolicity on the whole box: a must keep the inward sign with a
    // slope floor, else the Neumann geometry degrades.
    for (int j = 0; j < m2; ++j) {
      const double aj = lf.alpha_.scalar() ? lf.alpha_.at(0) : lf.alpha_.at(j);
      for (int i = 0; i < m1; ++i) {
        if (i == c) continue;
        const double x = a.x1(i);
        if (!(-a.at(i, j) * (x > 0 ? 1.0 : -1.0) >=
              0.15 * (-aj) * std::abs(x)))
          throw StageError(Stage::kLinearize,
                           "a vanishes away from x1 = 0 inside the box "
                           "(non-hyperbolic box): use a smaller box");
      }
    }

    const LineFn d2 = a.slice_derivative(2);
    const LineFn d3 = a.slice_derivative(3);
    const LineFn d4 = a.slice_derivative(4);
    lf.xi_ = a.zeros_like();
    lf.dxi_ = a.zeros_like();
    const double s_patch = std::max(1e-3, 0.75 * h);
    for (int j = 0; j < m2; ++j) {
      const double al = lf.alpha_.scalar() ? lf.alpha_.at(0) : lf.alpha_.at(j);
      const double p = (d2.scalar() ? d2.at(0) : d2.at(j)) / (2.0 * al);
      const double r = (d3.scalar() ? d3.at(0) : d3.at(j)) / (6.0 * al);
      const double w = (d4.scalar() ? d4.at(0) : d4.at(j)) / (24.0 * al);
      auto integrand = [&](double s) {
        if (std::abs(s) < s_patch)
          return -p + (p * p - r) * s + (2.0 * p * r - p * p * p - w) * s * s;
        return al / a.eval_on_row(s, j) - 1.0 / s;
      };
      // Cumulative integral from the center outward; per-interval Simpson.
      std::vector<double> I(m1, 0.0);
      auto panel = [&](double x0, double x1v) {
        const int np = 8;
        const double hh = (x1v - x0) / (2 * np);
        double s = integrand(x0) + integrand(x1v);
        for (int k = 1; k < 2 * np; k += 2) s += 4.0 * integrand(x0 + k * hh);
        for (int k = 2; k < 2 * np; k += 2) s += 2.0 * integrand(x0 + k * hh);
        return s * hh / 3.0;
      };
      for (int i = c + 1; i < m1; ++i)
        I[i] = I[i - 1] + panel(a.x1(i - 1), a.x1(i));
      for (int i = c - 1; i >= 0; --i)
        I[i] = I[i + 1] + panel(a.x1(i + 1), a.x1(i));
      for (int i = 0; i < m1; ++i) {
        const double x = a.x1(i);
        const double e = std::exp(I[i]);
        lf.xi_.at(i, j) = x * e;
        lf.dxi_.at(i, j) = i == c ? 1.0 : e * al * x / a.at(i, j);
        if (i != c && !(lf.dxi_.at(i, j) > 0.0))
          throw StageError(Stage::kLinearize,
                           "linearizing map is not monotone");
      }
    }

    // Second-derivative table d(dxi)/dx1 = (alpha/a)(dxi - xi a'/a).  The
    // quotient cancels near the slice, so a jet-series patch takes over
    // there: xi'' = e^I (2F + x(F^2 + F')) with F the integrand series.
    {
      const BoxFunction ap = aprime ? *aprime : a.derivative_x1(1);
      lf.dxi1_ = a.zeros_like();
      const double s_patch2 = std::max(1e-3, 6.0 * h);
      for (int j = 0; j < m2; ++j) {
        const double al = lf.alpha_.scalar() ? lf.alpha_.at(0) : lf.alpha_.at(j);
        const double p = (d2.scalar() ? d2.at(0) : d2.at(j)) / (2.0 * al);
        const double r = (d3.scalar() ? d3.at(0) : d3.at(j)) / (6.0 * al);
        const double w4 = (d4.scalar() ? d4.at(0) : d4.at(j)) / (24.0 * al);
        const double c0 = -p;
        const double c1 = p * p - r;
        const double c2 = 2.0 * p * r - p * p * p - w4;
        for (int i = 0; i < m1; ++i) {
          const double x = a.x1(i);
          if (std::abs(x) < s_patch2) {
            const double F = c0 + c1 * x + c2 * x * x;
            const double Fp = c1 + 2.0 * c2 * x;
            const double eI = i == c ? 1.0 : lf.xi_.at(i, j) / x;
            lf.dxi1_.at(i, j) = eI * (2.0 * F + x * (F * F + Fp));
          } else {
            const double av = a.at(i, j);
            lf.dxi1_.at(i, j) =
                (al / av) * (lf.dxi_.at(i, j) -
                             lf.xi_.at(i, j) * ap.at(i, j) / av);
          }
        }
      }
    }

    // Common xi-extent across slices and the inverse tables.  The xi-grid
    // is refined by the stretch of the linearizing map so features keep the
    // same node density they had in x1.
    double Lxi = 1e300;
    double min_dxi = 1e300;
    for (int j = 0; j < m2; ++j) {
      Lxi = std::min(Lxi, std::min(-lf.xi_.at(0, j), lf.xi_.at(m1 - 1, j)));
      for (int i = 0; i < m1; ++i)
        min_dxi = std::min(min_dxi, lf.dxi_.at(i, j));
    }
    lf.Lxi_ = 0.995 * Lxi;
    if (!(lf.Lxi_ > 0.0))
      throw StageError(Stage::kLinearize, "degenerate xi extent");
    int m1xi = (int)std::ceil(2.0 * lf.Lxi_ / (h * min_dxi));
    m1xi = std::clamp(m1xi | 1, m1, 769);
    lf.m1xi_ = m1xi;
    lf.xinv_ = BoxFunction::sample(
        a.dim(), m1xi, lf.Lxi_, m2, a.L2(), [&](double xiv, double yv) {
          const int j =
              a.dim() == 2
                  ? (int)std::lround((yv + a.L2()) * (m2 - 1) / (2.0 * a.L2()))
                  : 0;
          return lf.invert_row(xiv, j);
        });
    lf.validate(tol_conjugacy);
    return lf;
  }

  const LineFn& alpha() const { return alpha_; }
  const BoxFunction& xi() const { return xi_; }
  const BoxFunction& dxi() const { return dxi_; }
  const BoxFunction& dxi1() const { return dxi1_; }
  double Lxi() const { return Lxi_; }

  /// Push a coefficient together with its exact x1-derivative; returns the
  /// linearized coefficient and its exact xi-derivative
  ///   chat(xi,y) = c(x) dxi(x),   dchat/dxi = c'(x) + c(x) dxi'(x)/dxi(x).
  std::pair<BoxFunction, BoxFunction> to_linear_pair(
      const BoxFunction& c, const BoxFunction& cprime) const {
    auto chat = BoxFunction::sample(
        c.dim(), m1xi_, Lxi_, c.m2(), c.L2(), [&](double xiv, double yv) {
          const int j = c.dim() == 2
                            ? (int)std::lround((yv + c.L2()) * (c.m2() - 1) /
                                               (2.0 * c.L2()))
                            : 0;
          const double x1 = xinv_.eval_on_row(xiv, j);
          return c.eval_on_row(x1, j) * dxi_.eval_on_row(x1, j);
        });
    auto dchat = BoxFunction::sample(
        c.dim(), m1xi_, Lxi_, c.m2(), c.L2(), [&](double xiv, double yv) {
          const int j = c.dim() == 2
                            ? (int)std::lround((yv + c.L2()) * (c.m2() - 1) /
                                               (2.0 * c.L2()))
                            : 0;
          const double x1 = xinv_.eval_on_row(xiv, j);
          return cprime.eval_on_row(x1, j) +
                 c.eval_on_row(x1, j) * dxi1_.eval_on_row(x1, j) /
                     dxi_.eval_on_row(x1, j);
        });
    return {std::move(chat), std::move(dchat)};
  }

  /// Push a multiple-of-the-field coefficient to linearized coordinates:
  /// chat(xi, y) = c(x1(xi), y) * dxi(x1(xi), y).
  BoxFunction to_linear(const BoxFunction& c) const {
    return BoxFunction::sample(
        c.dim(), m1xi_, Lxi_, c.m2(), c.L2(), [&](double xiv, double yv) {
          const int j = c.dim() == 2
                            ? (int)std::lround((yv + c.L2()) * (c.m2() - 1) /
                                               (2.0 * c.L2()))
                            : 0;
          const double x1 = xinv_.eval_on_row(xiv, j);
          return c.eval_on_row(x1, j) * dxi_.eval_on_row(x1, j);
        });
  }

  /// Pull a linearized coefficient back: b(x1,y) = bhat(xi(x1,y), y) / dxi.
  BoxFunction from_linear(const BoxFunction& bhat) const {
    return BoxFunction::sample(
        xi_.dim(), xi_.m1(), xi_.L1(), xi_.m2(), xi_.L2(),
        [&](double x1v, double yv) {
          const int j = xi_.dim() == 2
                            ? (int)std::lround((yv + xi_.L2()) *
                                               (xi_.m2() - 1) / (2.0 * xi_.L2()))
                            : 0;
          const int i = (int)std::lround((x1v + xi_.L1()) * (xi_.m1() - 1) /
                                         (2.0 * xi_.L1()));
          // Allow a little extrapolation: xi at the extreme rows can exceed
          // the common extent by a few percent; beyond that, clamp (the far
          // edge is cut off downstream anyway).
          const double over = 1.5 * 2.0 * Lxi_ / (m1xi_ - 1);
          const double cl = std::clamp(xi_.at(i, j), -Lxi_ - over, Lxi_ + over);
          return bhat.eval_on_row(cl, j) / dxi_.at(i, j);
        });
  }

  /// Conjugacy residual: the time-t flow of a d/dx1 mapped through xi must
  /// equal multiplication by e^{alpha t}.  Sampled over the box for
  /// t in {0.1, 0.5, 1}; the builder rejects when above tolerance.
  double conjugacy_residual() const {
    double worst = 0.0;
    for (int j = 0; j < a_.m2(); ++j) {
      const double al = alpha_.scalar() ? alpha_.at(0) : alpha_.at(j);
      for (int i = 0; i < a_.m1(); i += std::max(1, a_.m1() / 16)) {
        const double x0 = 0.72 * a_.x1(i);
        for (double t : {0.1, 0.5, 1.0}) {
          // 1-D RK4 of the slice field.
          double x = x0;
          const int steps = 256;
          const double hh = t / steps;
          for (int s = 0; s < steps; ++s) {
            const double k1 = a_.eval_on_row(x, j);
            const double k2 = a_.eval_on_row(x + 0.5 * hh * k1, j);
            const double k3 = a_.eval_on_row(x + 0.5 * hh * k2, j);
            const double k4 = a_.eval_on_row(x + hh * k3, j);
            x += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
          }
          const double lhs = xi_.eval_on_row(x, j);
          const double rhs = std::exp(al * t) * xi_.eval_on_row(x0, j);
          worst = std::max(worst, std::abs(lhs - rhs));
        }
      }
    }
    return worst;
  }

 private:
  double invert_row(double target, int j) const {
    // xi is strictly increasing along the row; bisect then polish.
    int lo = 0, hi = xi_.m1() - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (xi_.at(mid, j) < target)
        lo = mid;
      else
        hi = mid;
    }
    double x = xi_.x1(lo) +
               (target - xi_.at(lo, j)) /
                   std::max(1e-300, xi_.at(hi, j) - xi_.at(lo, j)) *
                   (xi_.x1(hi) - xi_.x1(lo));
    for (int it = 0; it < 60; ++it) {
      const double f = xi_.eval_on_row(x, j) - target;
      if (std::abs(f) <= 1e-13 * std::max(1.0, std::abs(target))) return x;
      const double d = dxi_.eval_on_row(x, j);
      x -= f / d;
      x = std::clamp(x, -xi_.L1(), xi_.L1());
    }
    return x;
  }

  void validate(double tol) const {
    const double r = conjugacy_residual();
    if (!(r <= tol))
      throw StageError(Stage::kLinearize,
                       "conjugacy invariant failed: residual " +
                           std::to_string(r));
  }

  BoxFunction a_;
  LineFn alpha_;
  BoxFunction xi_, dxi_, dxi1_, xinv_;
  double Lxi_ = 0.0;
  int m1xi_ = 0;
};

}  // namespace torfact

#endif  // TORFACT_LINEARIZE_HPP
