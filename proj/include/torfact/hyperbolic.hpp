// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_HYPERBOLIC_HPP
#define TORFACT_HYPERBOLIC_HPP

#include <cmath>
#include <functional>

#include "torfact/box.hpp"

namespace torfact {

/// Hyperbolicity margin: the linearized rate alpha(y) must satisfy
/// sup alpha <= -kAlphaMin.  The Neumann iteration count scales like
/// 1/|sup alpha|, so seeds below this margin are rejected.
inline constexpr double kAlphaMin = 0.05;

namespace detail {

inline void require_hyperbolic(const LineFn& alpha) {
  if (!(alpha.max() <= -kAlphaMin))
    throw StageError(Stage::kNeumann,
                     "sup alpha exceeds the hyperbolicity margin -" +
                         std::to_string(kAlphaMin));
}

/// Composite Simpson with panel doubling until two successive values agree
/// to 1e-11 (or the panel cap is reached).
inline double simpson_adaptive(const std::function<double(double)>& f,
                               double a, double b, int panels0 = 64,
                               double tol = 1e-11, int cap = 1024) {
  auto run = [&](int panels) {
    const int n = 2 * panels;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; i += 2) s += 4.0 * f(a + i * h);
    for (int i = 2; i < n; i += 2) s += 2.0 * f(a + i * h);
    return s * h / 3.0;
  };
  double prev = run(panels0);
  for (int p = panels0 * 2; p <= cap; p *= 2) {
    const double cur = run(p);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace detail

/// b(x1,y) = b0(y) + x1 b1(y) + x1^2 u(x1,y).
struct QuadraticSplit {
  LineFn b0, b1;
  BoxFunction u;
};

/// Split off the constant and linear x1-jets; the quadratic remainder's
/// removable singularity at x1 = 0 is filled with half the second
/// x1-derivative on the slice.
inline QuadraticSplit split_quadratic(const BoxFunction& b) {
  QuadraticSplit s{b.slice_values(), b.slice_derivative(1), b.zeros_like()};
  const LineFn half_d2 = 0.5 * b.slice_derivative(2);
  const int c = b.m1() / 2;
  for (int i = 0; i < b.m1(); ++i) {
    const double x = b.x1(i);
    for (int j = 0; j < b.m2(); ++j) {
      if (i == c) {
        s.u.at(i, j) = half_d2.scalar() ? half_d2.at(0) : half_d2.at(j);
      } else {
        const double b0 = s.b0.scalar() ? s.b0.at(0) : s.b0.at(j);
        const double b1 = s.b1.scalar() ? s.b1.at(0) : s.b1.at(j);
        s.u.at(i, j) = (b.at(i, j) - b0 - x * b1) / (x * x);
      }
    }
  }
  return s;
}

inline BoxFunction reassemble(const QuadraticSplit& s) {
  return BoxFunction::from_line(s.u, s.b0) +
         BoxFunction::from_line(s.u, s.b1).times_x1_pow(1) +
         s.u.times_x1_pow(2);
}

/// The averaged transport operator of the linear hyperbolic model:
///   (H b)(x1,y) = int_0^1 e^{-t alpha(y)} b(e^{alpha(y) t} x1, y) dt.
inline BoxFunction hyperbolic_average(const LineFn& alpha,
                                      const BoxFunction& b) {
  detail::require_hyperbolic(alpha);
  BoxFunction out = b.zeros_like();
  for (int j = 0; j < b.m2(); ++j) {
    const double al = alpha.scalar() ? alpha.at(0) : alpha.at(j);
    for (int i = 0; i < b.m1(); ++i) {
      const double x = b.x1(i);
      out.at(i, j) = detail::simpson_adaptive(
          [&](double t) {
            return std::exp(-t * al) * b.eval_on_row(std::exp(al * t) * x, j);
          },
          0.0, 1.0);
    }
  }
  return out;
}

/// (S u)(x1,y) = int_{e^{alpha(y)}}^{1} u(tau x1, y) dtau.
inline BoxFunction scale_average(const LineFn& alpha, const BoxFunction& u) {
  detail::require_hyperbolic(alpha);
  BoxFunction out = u.zeros_like();
  for (int j = 0; j < u.m2(); ++j) {
    const double al = alpha.scalar() ? alpha.at(0) : alpha.at(j);
    for (int i = 0; i < u.m1(); ++i) {
      const double x = u.x1(i);
      out.at(i, j) = detail::simpson_adaptive(
          [&](double tau) { return u.eval_on_row(tau * x, j); }, std::exp(al),
          1.0);
    }
  }
  return out;
}

/// (R v)(x1,y) = e^{alpha(y)} v(e^{alpha(y)} x1, y).  A strict contraction:
/// |R|_{C^{k,0}} <= e^{sup alpha} < 1.
inline BoxFunction contraction_map(const LineFn& alpha, const BoxFunction& v) {
  detail::require_hyperbolic(alpha);
  BoxFunction out = v.zeros_like();
  for (int j = 0; j < v.m2(); ++j) {
    const double e = std::exp(alpha.scalar() ? alpha.at(0) : alpha.at(j));
    for (int i = 0; i < v.m1(); ++i)
      out.at(i, j) = e * v.eval_on_row(e * v.x1(i), j);
  }
  return out;
}

/// (I - R)^{-1} psi by the geometric series sum_k R^k psi, truncated when
/// the term norm falls below tol * (1 - e^{sup alpha}).
inline BoxFunction neumann_inverse(const LineFn& alpha, const BoxFunction& psi,
                                   double tol = 1e-11) {
  detail::require_hyperbolic(alpha);
  const double rho = std::exp(alpha.max());
  const double cutoff = tol * (1.0 - rho);
  const int cap =
      (int)std::ceil(10.0 / kAlphaMin * std::log(1.0 / tol)) + 1;
  BoxFunction acc = psi;
  BoxFunction term = psi;
  for (int k = 1; k <= cap; ++k) {
    term = contraction_map(alpha, term);
    acc = acc + term;
    if (term.max_abs() < cutoff) return acc;
  }
  throw StageError(Stage::kNeumann, "Neumann series hit the iteration cap");
}

/// Inverse of scale_average:  w -> d/dx1 ( x1 (I-R)^{-1} w ).
inline BoxFunction scale_average_inverse(const LineFn& alpha,
                                         const BoxFunction& w,
                                         double tol = 1e-12) {
  return neumann_inverse(alpha, w, tol).times_x1_pow(1).derivative_x1(1);
}

/// The same inverse with the derivative supplied analytically: expanding
/// d/dx1 (x1 sum_k R^k w) termwise gives
///   (I-R)^{-1} w + x1 sum_k e^{2k alpha} w'(e^{k alpha} x1, y),
/// and the second series is the Neumann inverse of the weighted contraction
/// R2 v = e^{2 alpha} v(e^{alpha} x1, y).  This avoids numerical
/// differentiation entirely when w' is known exactly.
inline BoxFunction scale_average_inverse_exact(const LineFn& alpha,
                                               const BoxFunction& w,
                                               const BoxFunction& dw,
                                               double tol = 1e-12) {
  detail::require_hyperbolic(alpha);
  const double rho = std::exp(alpha.max());
  const double cutoff = tol * (1.0 - rho);
  const int cap = (int)std::ceil(10.0 / kAlphaMin * std::log(1.0 / tol)) + 1;
  BoxFunction acc2 = dw;
  BoxFunction term = dw;
  for (int k = 1; k <= cap; ++k) {
    // R2: e^{2 alpha} v(e^{alpha} x1)
    BoxFunction next = term.zeros_like();
    for (int j = 0; j < term.m2(); ++j) {
      const double e = std::exp(alpha.scalar() ? alpha.at(0) : alpha.at(j));
      for (int i = 0; i < term.m1(); ++i)
        next.at(i, j) = e * e * term.eval_on_row(e * term.x1(i), j);
    }
    term = next;
    acc2 = acc2 + term;
    if (term.max_abs() < cutoff) break;
    if (k == cap)
      throw StageError(Stage::kNeumann, "derivative series hit the cap");
  }
  return neumann_inverse(alpha, w, tol) + acc2.times_x1_pow(1);
}

/// Transversal derivative of phi = (I-R)^{-1} psi via the chain-rule
/// recursion; uses R phi = phi - psi so no extra interpolation enters:
///   d phi/dy = (I-R)^{-1} [ d psi/dy + alpha'(y) (R phi)
///                           + alpha'(y) x1 d(R phi)/dx1 ].
inline BoxFunction neumann_y_derivative(const LineFn& alpha,
                                        const BoxFunction& psi,
                                        const BoxFunction& phi,
                                        double tol = 1e-11) {
  if (psi.dim() == 1) return psi.zeros_like();
  const BoxFunction rphi = phi - psi;
  const LineFn dal = alpha.derivative();
  const BoxFunction dal_box = BoxFunction::from_line(psi, dal);
  const BoxFunction rhs =
      psi.derivative_y(1) + dal_box * rphi +
      dal_box * rphi.derivative_x1(1).times_x1_pow(1);
  return neumann_inverse(alpha, rhs, tol);
}

/// Inverse of the averaged transport operator, assembled blockwise from the
/// split: the constant block scales by alpha/(1-e^{-alpha}), the linear
/// block is untouched, and the quadratic block inverts through
/// scale_average_inverse.  When the x1-derivative of c is available
/// analytically, pass it for a fully derivative-free quadratic block.
inline BoxFunction hyperbolic_average_inverse(const LineFn& alpha,
                                              const BoxFunction& c,
                                              double tol = 1e-12,
                                              const BoxFunction* dc = nullptr) {
  detail::require_hyperbolic(alpha);
  QuadraticSplit s = split_quadratic(c);
  LineFn factor = alpha.scalar()
                      ? LineFn::constant(alpha.at(0) /
                                         (1.0 - std::exp(-alpha.at(0))))
                      : alpha.map([](double a) {
                          return a / (1.0 - std::exp(-a));
                        });
  const BoxFunction w =
      -1.0 * (BoxFunction::from_line(s.u, alpha) * s.u);
  BoxFunction ub = s.u.zeros_like();
  if (dc == nullptr) {
    ub = scale_average_inverse(alpha, w, tol);
  } else {
    // u' = (c' - c1 - 2 x1 u)/x1^2; the quotient cancels near the slice,
    // where the jet series u' = c3 + 2 c4 x1 takes over.
    BoxFunction du = s.u.zeros_like();
    const LineFn c3 = (1.0 / 6.0) * c.slice_derivative(3);
    const LineFn c4 = (1.0 / 24.0) * c.slice_derivative(4);
    const double patch = 6.0 * c.h1();
    for (int i = 0; i < c.m1(); ++i) {
      const double x = c.x1(i);
      for (int j = 0; j < c.m2(); ++j) {
        if (std::abs(x) < patch) {
          const double a3 = c3.scalar() ? c3.at(0) : c3.at(j);
          const double a4 = c4.scalar() ? c4.at(0) : c4.at(j);
          du.at(i, j) = a3 + 2.0 * a4 * x;
        } else {
          const double c1 = s.b1.scalar() ? s.b1.at(0) : s.b1.at(j);
          du.at(i, j) =
              (dc->at(i, j) - c1 - 2.0 * x * s.u.at(i, j)) / (x * x);
        }
      }
    }
    const BoxFunction dwv = -1.0 * (BoxFunction::from_line(du, alpha) * du);
    ub = scale_average_inverse_exact(alpha, w, dwv, tol);
  }
  QuadraticSplit out{factor * s.b0, s.b1, ub};
  return reassemble(out);
}

}  // namespace torfact

#endif  // TORFACT_HYPERBOLIC_HPP
