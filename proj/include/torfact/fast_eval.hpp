// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_FAST_EVAL_HPP
#define TORFACT_FAST_EVAL_HPP

#include <vector>

#include "torfact/grid.hpp"
#include "torfact/vector_field.hpp"

namespace torfact {
namespace detail {

inline constexpr int kStencil = 12;

/// Denominators of the 12-point equispaced Lagrange basis at nodes 0..11.
inline const double* lagrange_denom() {
  static const double d[kStencil] = {
      // prod_{k!=j} (j-k) for j = 0..11
      -39916800.0, 3628800.0,  -725760.0, 241920.0,  -120960.0, 86400.0,
      -86400.0,    120960.0,   -241920.0, 725760.0,  -3628800.0, 39916800.0};
  return d;
}

/// Lagrange weights on the integer stencil 0..11 at position s.
inline void lagrange_weights(double s, double* w) {
  double pre[kStencil], suf[kStencil];
  pre[0] = 1.0;
  for (int j = 1; j < kStencil; ++j) pre[j] = pre[j - 1] * (s - (j - 1));
  suf[kStencil - 1] = 1.0;
  for (int j = kStencil - 2; j >= 0; --j) suf[j] = suf[j + 1] * (s - (j + 1));
  const double* den = lagrange_denom();
  for (int j = 0; j < kStencil; ++j) w[j] = pre[j] * suf[j] / den[j];
}

}  // namespace detail

/// Fast periodic interpolation of a GridFunction: the function is spectrally
/// upsampled once onto a finer grid and then evaluated by local 12-point
/// Lagrange interpolation.  Interpolation error is far below the flow and
/// composition tolerances; use GridFunction::evaluate where exact spectral
/// values are required.
class FastScalar {
 public:
  FastScalar() = default;

  explicit FastScalar(const GridFunction& f) {
    dim_ = f.dim();
    m1_ = table_size(f.n1(), dim_);
    m2_ = dim_ == 2 ? table_size(f.n2(), dim_) : 1;
    GridFunction fine =
        (m1_ == f.n1() && m2_ == f.n2()) ? f : f.resample({m1_, m2_});
    table_ = fine.samples();
  }

  double eval(Pt p) const {
    double w1[detail::kStencil], w2[detail::kStencil] = {0};
    int i0, j0 = 0;
    locate(p[0], m1_, &i0, w1);
    if (dim_ == 2) locate(p[1], m2_, &j0, w2);
    const int mask1 = m1_ - 1;
    if (dim_ == 1) {
      double acc = 0.0;
      for (int a = 0; a < detail::kStencil; ++a)
        acc += w1[a] * table_[(size_t)((i0 + a) & mask1)];
      return acc;
    }
    const int mask2 = m2_ - 1;
    double acc = 0.0;
    for (int a = 0; a < detail::kStencil; ++a) {
      const double* row = table_.data() + (size_t)((i0 + a) & mask1) * m2_;
      double racc = 0.0;
      for (int b = 0; b < detail::kStencil; ++b)
        racc += w2[b] * row[(j0 + b) & mask2];
      acc += w1[a] * racc;
    }
    return acc;
  }

 private:
  static int table_size(int n, int dim) {
    int target = dim == 1 ? 16 * n : 8 * n;
    int floor_sz = dim == 1 ? 1024 : 512;
    int cap = dim == 1 ? 8192 : 1024;
    int m = std::max(target, floor_sz);
    m = std::min(m, cap);
    int p = 16;
    while (p < m) p <<= 1;
    return std::max(p, n);
  }

  static void locate(double x, int m, int* i0, double* w) {
    const double t = wrap_angle(x) * m / kTau;
    const double fl = std::floor(t);
    detail::lagrange_weights(t - fl + 5.0, w);
    int i = (int)fl - 5;
    *i0 = ((i % m) + m) % m;
  }

  int dim_ = 1;
  int m1_ = 0, m2_ = 1;
  std::vector<double> table_;
};

/// Fast evaluator for all components of a VectorField.
class FastField {
 public:
  FastField() = default;
  explicit FastField(const VectorField& X) : dim_(X.dim()) {
    for (int a = 0; a < dim_; ++a) comp_[a] = FastScalar(X.comp(a));
  }

  int dim() const { return dim_; }

  Pt eval(Pt p) const {
    Pt v{0.0, 0.0};
    for (int a = 0; a < dim_; ++a) v[a] = comp_[a].eval(p);
    return v;
  }

 private:
  int dim_ = 1;
  std::array<FastScalar, 2> comp_;
};

/// Fast evaluator of the first derivatives of all components of a field
/// (the matrix dX_a/dx_b); used by variational flows and map Jacobians.
class FastJacobian {
 public:
  FastJacobian() = default;
  explicit FastJacobian(const VectorField& X) : dim_(X.dim()) {
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b)
        d_[a][b] = FastScalar(X.comp(a).derivative(b));
  }

  /// Row-major d x d matrix of partials at p: out[a][b] = dX_a/dx_b.
  void eval(Pt p, double out[2][2]) const {
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) out[a][b] = d_[a][b].eval(p);
  }

 private:
  int dim_ = 1;
  FastScalar d_[2][2];
};

}  // namespace torfact

#endif  // TORFACT_FAST_EVAL_HPP
