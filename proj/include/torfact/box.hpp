// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_BOX_HPP
#define TORFACT_BOX_HPP

#include <algorithm>
#include <functional>
#include <vector>

#include "torfact/common.hpp"
#include "torfact/fast_eval.hpp"

namespace torfact {
namespace detail {

/// Fornberg's algorithm: weights C[k*n+j] so that sum_j C[k*n+j] f(x_j)
/// approximates f^(k)(z), for k = 0..m.
inline void fornberg(double z, const double* x, int n, int m, double* C) {
  std::fill(C, C + (size_t)(m + 1) * n, 0.0);
  double c1 = 1.0;
  double c4 = x[0] - z;
  C[0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          C[(size_t)k * n + i] =
              c1 * (k * C[(size_t)(k - 1) * n + i - 1] -
                    c5 * C[(size_t)k * n + i - 1]) /
              c2;
        C[i] = -c1 * c5 * C[i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k)
        C[(size_t)k * n + j] =
            (c4 * C[(size_t)k * n + j] - k * C[(size_t)(k - 1) * n + j]) / c3;
      C[j] = c4 * C[j] / c3;
    }
    c1 = c2;
  }
}

}  // namespace detail

/// A smooth function of the transversal coordinate y on [-L, L] (or a
/// constant when the problem is one-dimensional and there is no y).
class LineFn {
 public:
  LineFn() = default;
  LineFn(std::vector<double> v, double L) : v_(std::move(v)), L_(L) {
    if (v_.empty()) throw StageError(Stage::kInput, "LineFn: empty");
    if (v_.size() > 1 && (v_.size() < 13 || v_.size() % 2 == 0))
      throw StageError(Stage::kInput, "LineFn: need odd node count >= 13");
  }
  static LineFn constant(double c) { return LineFn({c}, 0.0); }

  int m() const { return (int)v_.size(); }
  double L() const { return L_; }
  bool scalar() const { return v_.size() == 1; }
  double at(int j) const { return v_[j]; }
  double node(int j) const {
    return scalar() ? 0.0 : -L_ + 2.0 * L_ * j / (m() - 1);
  }
  const std::vector<double>& values() const { return v_; }

  double eval(double y) const {
    if (scalar()) return v_[0];
    const double h = 2.0 * L_ / (m() - 1);
    double t = (y + L_) / h;
    int i0 = (int)std::floor(t) - 5;
    i0 = std::clamp(i0, 0, m() - detail::kStencil);
    double w[detail::kStencil];
    detail::lagrange_weights(t - i0, w);
    double acc = 0.0;
    for (int a = 0; a < detail::kStencil; ++a) acc += w[a] * v_[i0 + a];
    return acc;
  }

  LineFn derivative() const {
    if (scalar()) return constant(0.0);
    const int n = m();
    std::vector<double> out(n);
    std::vector<double> xs(9), C(2 * 9);
    const double h = 2.0 * L_ / (n - 1);
    for (int i = 0; i < n; ++i) {
      int s0 = std::clamp(i - 4, 0, n - 9);
      for (int k = 0; k < 9; ++k) xs[k] = (s0 + k) * h;
      detail::fornberg(i * h, xs.data(), 9, 1, C.data());
      double acc = 0.0;
      for (int k = 0; k < 9; ++k) acc += C[9 + k] * v_[s0 + k];
      out[i] = acc;
    }
    return LineFn(std::move(out), L_);
  }

  double max_abs() const {
    double r = 0.0;
    for (double v : v_) r = std::max(r, std::abs(v));
    return r;
  }
  double max() const { return *std::max_element(v_.begin(), v_.end()); }

  LineFn map(const std::function<double(double)>& f) const {
    std::vector<double> out = v_;
    for (double& v : out) v = f(v);
    return LineFn(std::move(out), L_);
  }

  friend LineFn operator*(const LineFn& a, const LineFn& b) {
    LineFn r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] *= b.v_[i];
    return r;
  }
  friend LineFn operator+(const LineFn& a, const LineFn& b) {
    LineFn r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] += b.v_[i];
    return r;
  }
  friend LineFn operator-(const LineFn& a, const LineFn& b) {
    LineFn r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] -= b.v_[i];
    return r;
  }
  friend LineFn operator*(double c, const LineFn& a) {
    LineFn r = a;
    for (double& v : r.v_) v *= c;
    return r;
  }

 private:
  std::vector<double> v_;
  double L_ = 0.0;
};

/// A smooth function on the working box [-L1,L1] x [-L2,L2], stored on a
/// uniform tensor grid with odd node counts (so the transversal slice x1 = 0
/// and the base point sit exactly on nodes).  Interpolation is local
/// 12-point Lagrange per axis; derivatives are 9-point (order-8) finite
/// differences with one-sided stencils near the edges.  All the hyperbolic
/// operators evaluate inward (|e^alpha x1| < |x1|), so no extension beyond
/// the box is ever needed.
class BoxFunction {
 public:
  BoxFunction() = default;

  static BoxFunction sample(int dim, int m1, double L1, int m2, double L2,
                            const std::function<double(double, double)>& rule) {
    BoxFunction f;
    f.dim_ = dim;
    f.m1_ = m1;
    f.m2_ = dim == 2 ? m2 : 1;
    f.L1_ = L1;
    f.L2_ = dim == 2 ? L2 : 0.0;
    f.check();
    f.v_.resize((size_t)f.m1_ * f.m2_);
    for (int i = 0; i < f.m1_; ++i)
      for (int j = 0; j < f.m2_; ++j)
        f.v_[(size_t)i * f.m2_ + j] = rule(f.x1(i), f.y(j));
    for (double v : f.v_)
      if (!std::isfinite(v))
        throw StageError(Stage::kSampling, "non-finite box sample");
    return f;
  }

  static BoxFunction zeros(int dim, int m1, double L1, int m2, double L2) {
    return sample(dim, m1, L1, m2, L2, [](double, double) { return 0.0; });
  }

  int dim() const { return dim_; }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  double L1() const { return L1_; }
  double L2() const { return L2_; }
  double h1() const { return 2.0 * L1_ / (m1_ - 1); }
  double x1(int i) const { return -L1_ + 2.0 * L1_ * i / (m1_ - 1); }
  double y(int j) const {
    return dim_ == 2 ? -L2_ + 2.0 * L2_ * j / (m2_ - 1) : 0.0;
  }
  double at(int i, int j = 0) const { return v_[(size_t)i * m2_ + j]; }
  double& at(int i, int j = 0) { return v_[(size_t)i * m2_ + j]; }
  const std::vector<double>& values() const { return v_; }
  bool same_box(const BoxFunction& o) const {
    return dim_ == o.dim_ && m1_ == o.m1_ && m2_ == o.m2_ && L1_ == o.L1_ &&
           L2_ == o.L2_;
  }

  /// Interpolate along x1 within the row of node index j.
  double eval_on_row(double x1v, int j) const {
    double w[detail::kStencil];
    const int i0 = locate(x1v, m1_, L1_, w);
    double acc = 0.0;
    for (int a = 0; a < detail::kStencil; ++a)
      acc += w[a] * v_[(size_t)(i0 + a) * m2_ + j];
    return acc;
  }

  double eval(double x1v, double yv = 0.0) const {
    if (dim_ == 1 || m2_ == 1) return eval_on_row(x1v, 0);
    double w1[detail::kStencil], w2[detail::kStencil];
    const int i0 = locate(x1v, m1_, L1_, w1);
    const int j0 = locate(yv, m2_, L2_, w2);
    double acc = 0.0;
    for (int a = 0; a < detail::kStencil; ++a) {
      const double* row = v_.data() + (size_t)(i0 + a) * m2_;
      double r = 0.0;
      for (int b = 0; b < detail::kStencil; ++b) r += w2[b] * row[j0 + b];
      acc += w1[a] * r;
    }
    return acc;
  }

  BoxFunction derivative_x1(int order = 1) const { return fd_axis(0, order); }
  BoxFunction derivative_y(int order = 1) const {
    if (dim_ == 1) return zeros_like();
    return fd_axis(1, order);
  }

  /// Derivatives along x1 at the slice x1 = 0 (a node by construction),
  /// returned as a function of y.
  LineFn slice_derivative(int order) const {
    const int n = m1_;
    const int c = n / 2;  // x1 = 0 node
    const int w = 4;      // 9-point stencil
    std::vector<double> xs(9), C((order + 1) * 9);
    for (int k = 0; k < 9; ++k) xs[k] = x1(c - w + k);
    detail::fornberg(0.0, xs.data(), 9, order, C.data());
    std::vector<double> out(m2_);
    for (int j = 0; j < m2_; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 9; ++k)
        acc += C[(size_t)order * 9 + k] * at(c - w + k, j);
      out[j] = acc;
    }
    return dim_ == 2 ? LineFn(std::move(out), L2_) : LineFn::constant(out[0]);
  }

  LineFn slice_values() const {
    const int c = m1_ / 2;
    std::vector<double> out(m2_);
    for (int j = 0; j < m2_; ++j) out[j] = at(c, j);
    return dim_ == 2 ? LineFn(std::move(out), L2_) : LineFn::constant(out[0]);
  }

  double max_abs() const {
    double r = 0.0;
    for (double v : v_) r = std::max(r, std::abs(v));
    return r;
  }

  /// sup_{1<=i<=k} |d^i f/dx1^i| on the grid; order zero included on demand.
  double ck0_norm(int k, bool with_value = false) const {
    double m = with_value ? max_abs() : 0.0;
    BoxFunction d = *this;
    for (int i = 1; i <= k; ++i) {
      d = d.derivative_x1(1);
      m = std::max(m, d.max_abs());
    }
    return m;
  }

  BoxFunction zeros_like() const {
    BoxFunction f = *this;
    std::fill(f.v_.begin(), f.v_.end(), 0.0);
    return f;
  }

  BoxFunction map(const std::function<double(double)>& fn) const {
    BoxFunction f = *this;
    for (double& v : f.v_) v = fn(v);
    return f;
  }

  /// Broadcast a function of y across the box.
  static BoxFunction from_line(const BoxFunction& like, const LineFn& g) {
    BoxFunction f = like.zeros_like();
    for (int i = 0; i < f.m1_; ++i)
      for (int j = 0; j < f.m2_; ++j)
        f.at(i, j) = g.scalar() ? g.at(0) : g.at(j);
    return f;
  }

  /// Multiply by x1^p.
  BoxFunction times_x1_pow(int p) const {
    BoxFunction f = *this;
    for (int i = 0; i < m1_; ++i) {
      const double xp = std::pow(x1(i), p);
      for (int j = 0; j < m2_; ++j) f.at(i, j) *= xp;
    }
    return f;
  }

  friend BoxFunction operator+(const BoxFunction& a, const BoxFunction& b) {
    a.require_same(b);
    BoxFunction r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] += b.v_[i];
    return r;
  }
  friend BoxFunction operator-(const BoxFunction& a, const BoxFunction& b) {
    a.require_same(b);
    BoxFunction r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] -= b.v_[i];
    return r;
  }
  friend BoxFunction operator*(const BoxFunction& a, const BoxFunction& b) {
    a.require_same(b);
    BoxFunction r = a;
    for (size_t i = 0; i < r.v_.size(); ++i) r.v_[i] *= b.v_[i];
    return r;
  }
  friend BoxFunction operator*(double c, const BoxFunction& a) {
    BoxFunction r = a;
    for (double& v : r.v_) v *= c;
    return r;
  }

 private:
  void check() const {
    if (dim_ != 1 && dim_ != 2)
      throw StageError(Stage::kInput, "box dim must be 1 or 2");
    if (m1_ < 17 || m1_ % 2 == 0)
      throw StageError(Stage::kInput, "box m1 must be odd and >= 17");
    if (dim_ == 2 && (m2_ < 13 || m2_ % 2 == 0))
      throw StageError(Stage::kInput, "box m2 must be odd and >= 13");
    if (!(L1_ > 0.0) || (dim_ == 2 && !(L2_ > 0.0)))
      throw StageError(Stage::kInput, "box extents must be positive");
  }

  void require_same(const BoxFunction& o) const {
    if (!same_box(o)) throw StageError(Stage::kInput, "box mismatch");
  }

  static int locate(double x, int m, double L, double* w) {
    const double h = 2.0 * L / (m - 1);
    const double t = (x + L) / h;
    if (t < -2.0 || t > m + 1.0)
      throw StageError(Stage::kPullback, "box evaluation out of range");
    int i0 = (int)std::floor(t) - 5;
    i0 = std::clamp(i0, 0, m - detail::kStencil);
    detail::lagrange_weights(t - i0, w);
    return i0;
  }

  BoxFunction fd_axis(int axis, int order) const {
    const int n = axis == 0 ? m1_ : m2_;
    const double h = axis == 0 ? h1() : 2.0 * L2_ / (m2_ - 1);
    const int ns = 9;
    if (n < ns) throw StageError(Stage::kInput, "box too small for stencil");
    BoxFunction out = zeros_like();
    std::vector<double> xs(ns), C((order + 1) * ns);
    for (int i = 0; i < n; ++i) {
      int s0 = std::clamp(i - ns / 2, 0, n - ns);
      for (int k = 0; k < ns; ++k) xs[k] = (s0 + k) * h;
      detail::fornberg(i * h, xs.data(), ns, order, C.data());
      const double* cw = C.data() + (size_t)order * ns;
      const int other = axis == 0 ? m2_ : m1_;
      for (int j = 0; j < other; ++j) {
        double acc = 0.0;
        for (int k = 0; k < ns; ++k) {
          const int ii = axis == 0 ? s0 + k : j;
          const int jj = axis == 0 ? j : s0 + k;
          acc += cw[k] * at(ii, jj);
        }
        if (axis == 0)
          out.at(i, j) = acc;
        else
          out.at(j, i) = acc;
      }
    }
    return out;
  }

  int dim_ = 1;
  int m1_ = 0, m2_ = 1;
  double L1_ = 0.0, L2_ = 0.0;
  std::vector<double> v_;
};

}  // namespace torfact

#endif  // TORFACT_BOX_HPP
