// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_GRID_HPP
#define TORFACT_GRID_HPP

#include <algorithm>
#include <complex>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "torfact/common.hpp"
#include "torfact/fft.hpp"

namespace torfact {

/// A smooth real function on the flat torus T^n (n = 1 or 2), stored as
/// samples on a uniform periodic grid with nodes 2*pi*k/N per axis, plus the
/// trigonometric interpolant's coefficients.  Values are immutable after
/// construction; every operation returns a new function.
///
/// Evaluation at a grid node returns the stored sample exactly; off-grid
/// evaluation sums the full Fourier series (spectrally accurate for smooth
/// data).  Grids are powers of two, at least 16 nodes per axis.
class GridFunction {
 public:
  GridFunction() = default;

  static GridFunction from_samples(int dim, std::array<int, 2> shape,
                                   std::vector<double> samples) {
    GridFunction f;
    f.init(dim, shape, std::move(samples));
    return f;
  }

  /// Sample a pointwise rule at the grid nodes.  Non-finite rule values are
  /// rejected with the offending node location.
  static GridFunction sample(int dim, std::array<int, 2> shape,
                             const std::function<double(Pt)>& rule) {
    check_shape(dim, shape);
    const int n1 = shape[0], n2 = (dim == 2) ? shape[1] : 1;
    std::vector<double> s((size_t)n1 * n2);
    for (int i = 0; i < n1; ++i) {
      for (int j = 0; j < n2; ++j) {
        const Pt p{kTau * i / n1, kTau * j / n2};
        const double v = rule(p);
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite sample at node (" << p[0];
          if (dim == 2) os << ", " << p[1];
          os << ")";
          throw StageError(Stage::kSampling, os.str());
        }
        s[(size_t)i * n2 + j] = v;
      }
    }
    return from_samples(dim, shape, std::move(s));
  }

  static GridFunction zeros(int dim, std::array<int, 2> shape) {
    check_shape(dim, shape);
    const int n2 = (dim == 2) ? shape[1] : 1;
    return from_samples(dim, shape,
                        std::vector<double>((size_t)shape[0] * n2, 0.0));
  }

  static GridFunction constant(int dim, std::array<int, 2> shape, double c) {
    check_shape(dim, shape);
    const int n2 = (dim == 2) ? shape[1] : 1;
    return from_samples(dim, shape,
                        std::vector<double>((size_t)shape[0] * n2, c));
  }

  int dim() const { return dim_; }
  const std::array<int, 2>& shape() const { return shape_; }
  int n1() const { return shape_[0]; }
  int n2() const { return dim_ == 2 ? shape_[1] : 1; }
  size_t size() const { return samples_.size(); }
  const std::vector<double>& samples() const { return samples_; }
  const std::vector<std::complex<double>>& coeff() const { return coeff_; }

  double at(int i, int j = 0) const { return samples_[(size_t)i * n2() + j]; }

  Pt node(int i, int j = 0) const {
    return Pt{kTau * i / n1(), kTau * j / n2()};
  }

  bool same_grid(const GridFunction& o) const {
    return dim_ == o.dim_ && shape_ == o.shape_;
  }

  /// Trigonometric interpolation.  Exact (bit-for-bit) at grid nodes.
  double evaluate(Pt p) const {
    const double u = wrap_angle(p[0]) * n1() / kTau;
    const double v = (dim_ == 2) ? wrap_angle(p[1]) * n2() / kTau : 0.0;
    const double ur = std::round(u), vr = std::round(v);
    if (std::abs(u - ur) < 1e-9 * n1() && std::abs(v - vr) < 1e-9 * n2()) {
      const int i = ((int)ur) % n1();
      const int j = dim_ == 2 ? ((int)vr) % n2() : 0;
      return at(i, j);
    }
    return series_eval(p);
  }

  std::vector<double> evaluate(const std::vector<Pt>& pts) const {
    std::vector<double> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = evaluate(pts[i]);
    return out;
  }

  /// Spectral derivative along an axis.  Nyquist modes of odd orders are
  /// dropped (standard real-grid convention).
  GridFunction derivative(int axis, int order = 1) const {
    if (axis < 0 || axis >= dim_)
      throw StageError(Stage::kInput, "derivative: axis out of range");
    std::vector<std::complex<double>> c = coeff_;
    const int na = axis == 0 ? n1() : n2();
    for (int i = 0; i < n1(); ++i) {
      for (int j = 0; j < n2(); ++j) {
        const int k = axis == 0 ? i : j;
        const int f = detail::bin_freq(k, na);
        std::complex<double> m;
        if (2 * k == na && (order % 2 == 1)) {
          m = 0.0;
        } else {
          m = std::pow(std::complex<double>(0.0, (double)f), order);
        }
        c[(size_t)i * n2() + j] *= m;
      }
    }
    return from_coeff(dim_, shape_, std::move(c));
  }

  /// Sharp spectral low-pass: keep |freq| <= fraction * (N/2) per axis.
  GridFunction low_pass(double fraction) const {
    if (fraction >= 1.0) return *this;
    std::vector<std::complex<double>> c = coeff_;
    for (int i = 0; i < n1(); ++i) {
      const int f1 = std::abs(detail::bin_freq(i, n1()));
      for (int j = 0; j < n2(); ++j) {
        const int f2 = std::abs(detail::bin_freq(j, n2()));
        if (f1 > fraction * (n1() / 2) || (dim_ == 2 && f2 > fraction * (n2() / 2)))
          c[(size_t)i * n2() + j] = 0.0;
      }
    }
    return from_coeff(dim_, shape_, std::move(c));
  }

  /// Spectral resample to a new (power-of-two) grid by zero-padding or
  /// truncating the coefficient array.
  GridFunction resample(std::array<int, 2> nshape) const {
    check_shape(dim_, nshape);
    const int m1 = nshape[0], m2 = dim_ == 2 ? nshape[1] : 1;
    std::vector<std::complex<double>> c((size_t)m1 * m2, 0.0);
    for (int i = 0; i < n1(); ++i) {
      const int f1 = detail::bin_freq(i, n1());
      if (2 * std::abs(f1) > m1) continue;
      int ii = f1 >= 0 ? f1 : f1 + m1;
      if (2 * f1 == -n1() && m1 > n1()) continue;  // drop old Nyquist's alias
      for (int j = 0; j < n2(); ++j) {
        const int f2 = detail::bin_freq(j, n2());
        if (2 * std::abs(f2) > m2 && dim_ == 2) continue;
        int jj = dim_ == 2 ? (f2 >= 0 ? f2 : f2 + m2) : 0;
        std::complex<double> v = coeff_[(size_t)i * n2() + j];
        // When refining, an old Nyquist cosine splits onto +-N/2 bins.
        double scale = 1.0;
        if (m1 > n1() && 2 * f1 == n1()) scale *= 0.5;
        if (dim_ == 2 && m2 > n2() && 2 * f2 == n2()) scale *= 0.5;
        c[(size_t)ii * m2 + jj] += v * scale;
        if (m1 > n1() && 2 * f1 == n1())
          c[(size_t)(m1 - f1) * m2 + jj] += v * scale;
        if (dim_ == 2 && m2 > n2() && 2 * f2 == n2()) {
          c[(size_t)ii * m2 + (m2 - f2)] += v * scale;
          if (m1 > n1() && 2 * f1 == n1())
            c[(size_t)(m1 - f1) * m2 + (m2 - f2)] += v * scale;
        }
      }
    }
    return from_coeff(dim_, nshape, std::move(c));
  }

  /// Grid-sup of |d^beta f| over all multi-indices |beta| <= k (order zero
  /// included).  This is the grid surrogate of the C^k norm; it converges to
  /// the true sup under refinement for smooth functions.
  double ck_norm(int k) const {
    if (k < 0 || k > 8) throw StageError(Stage::kInput, "ck_norm: k must be in [0,8]");
    double m = 0.0;
    for (int o1 = 0; o1 <= k; ++o1) {
      for (int o2 = 0; o2 <= (dim_ == 2 ? k - o1 : 0); ++o2) {
        GridFunction d = *this;
        if (o1 > 0) d = d.derivative(0, o1);
        if (o2 > 0) d = d.derivative(1, o2);
        m = std::max(m, d.max_abs());
      }
    }
    return m;
  }

  /// The axis-0 seminorm sup_{1<=i<=k} |d^i f / dx1^i|_C0 (order zero
  /// excluded), extended by the order-zero term when `with_value` is set.
  double ck0_norm(int k, bool with_value = false) const {
    double m = with_value ? max_abs() : 0.0;
    GridFunction d = *this;
    for (int i = 1; i <= k; ++i) {
      d = d.derivative(0, 1);
      m = std::max(m, d.max_abs());
    }
    return m;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : samples_) m = std::max(m, std::abs(v));
    return m;
  }

  GridFunction map(const std::function<double(double)>& fn) const {
    std::vector<double> s = samples_;
    for (double& v : s) v = fn(v);
    return from_samples(dim_, shape_, std::move(s));
  }

  friend GridFunction operator+(const GridFunction& a, const GridFunction& b) {
    a.require_same(b);
    std::vector<double> s = a.samples_;
    for (size_t i = 0; i < s.size(); ++i) s[i] += b.samples_[i];
    return from_samples(a.dim_, a.shape_, std::move(s));
  }
  friend GridFunction operator-(const GridFunction& a, const GridFunction& b) {
    a.require_same(b);
    std::vector<double> s = a.samples_;
    for (size_t i = 0; i < s.size(); ++i) s[i] -= b.samples_[i];
    return from_samples(a.dim_, a.shape_, std::move(s));
  }
  friend GridFunction operator*(double c, const GridFunction& a) {
    std::vector<double> s = a.samples_;
    for (double& v : s) v *= c;
    return from_samples(a.dim_, a.shape_, std::move(s));
  }
  friend GridFunction operator*(const GridFunction& a, const GridFunction& b) {
    a.require_same(b);
    std::vector<double> s = a.samples_;
    for (size_t i = 0; i < s.size(); ++i) s[i] *= b.samples_[i];
    return from_samples(a.dim_, a.shape_, std::move(s));
  }

 private:
  static void check_shape(int dim, const std::array<int, 2>& shape) {
    if (dim != 1 && dim != 2)
      throw StageError(Stage::kInput, "dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
      if (shape[a] < 16 || !is_pow2(shape[a]))
        throw StageError(Stage::kInput,
                         "grid size must be a power of two >= 16");
    }
  }

  void require_same(const GridFunction& o) const {
    if (!same_grid(o))
      throw StageError(Stage::kInput, "grid shape mismatch");
  }

  void init(int dim, std::array<int, 2> shape, std::vector<double> samples) {
    check_shape(dim, shape);
    const int n2 = (dim == 2) ? shape[1] : 1;
    if ((int)samples.size() != shape[0] * n2)
      throw StageError(Stage::kInput, "sample count does not match shape");
    for (double v : samples)
      if (!std::isfinite(v))
        throw StageError(Stage::kSampling, "non-finite sample");
    dim_ = dim;
    shape_ = shape;
    if (dim == 1) shape_[1] = 1;
    samples_ = std::move(samples);
    coeff_ = detail::dft2_forward(samples_, shape_[0], n2);
    const double inv = 1.0 / (double)samples_.size();
    for (auto& c : coeff_) c *= inv;
  }

  static GridFunction from_coeff(int dim, std::array<int, 2> shape,
                                 std::vector<std::complex<double>> c) {
    const int n2 = (dim == 2) ? shape[1] : 1;
    std::vector<std::complex<double>> unnorm = c;
    std::vector<double> s =
        detail::dft2_inverse_real(std::move(unnorm), shape[0], n2);
    GridFunction f;
    f.dim_ = dim;
    f.shape_ = shape;
    if (dim == 1) f.shape_[1] = 1;
    f.samples_ = std::move(s);
    for (double v : f.samples_)
      if (!std::isfinite(v))
        throw StageError(Stage::kSampling, "non-finite spectral result");
    f.coeff_ = std::move(c);
    return f;
  }

  double series_eval(Pt p) const {
    const int m1 = n1(), m2 = n2();
    // Phase tables per axis, indexed by DFT bin.
    phase_table(p[0], m1, ph1_);
    if (dim_ == 2) phase_table(p[1], m2, ph2_);
    std::complex<double> acc(0.0, 0.0);
    if (dim_ == 1) {
      for (int i = 0; i < m1; ++i) acc += coeff_[i] * ph1_[i];
    } else {
      for (int i = 0; i < m1; ++i) {
        std::complex<double> row(0.0, 0.0);
        const std::complex<double>* c = coeff_.data() + (size_t)i * m2;
        for (int j = 0; j < m2; ++j) row += c[j] * ph2_[j];
        acc += row * ph1_[i];
      }
    }
    return acc.real();
  }

  static void phase_table(double x, int n,
                          std::vector<std::complex<double>>& ph) {
    ph.resize(n);
    const std::complex<double> w(std::cos(x), std::sin(x));
    const std::complex<double> wc = std::conj(w);
    std::complex<double> up(1.0, 0.0);
    for (int k = 0; k <= n / 2; ++k) {
      ph[k] = up;
      up *= w;
    }
    std::complex<double> dn = wc;
    for (int k = n - 1; k > n / 2; --k) {
      ph[k] = dn;
      dn *= wc;
    }
  }

  int dim_ = 1;
  std::array<int, 2> shape_{16, 1};
  std::vector<double> samples_;
  std::vector<std::complex<double>> coeff_;
  mutable std::vector<std::complex<double>> ph1_, ph2_;  // scratch
};

/// The standard exp(-1/t) plateau profile: 1 for r <= r_in, 0 for
/// r >= r_out, and zeta(s)/(zeta(s)+zeta(1-s)) with zeta(t)=exp(-1/t),
/// s=(r_out-r)/(r_out-r_in), in between.
inline double plateau_profile(double r, double r_in, double r_out) {
  if (r <= r_in) return 1.0;
  if (r >= r_out) return 0.0;
  const double s = (r_out - r) / (r_out - r_in);
  const double za = std::exp(-1.0 / s);
  const double zb = std::exp(-1.0 / (1.0 - s));
  return za / (za + zb);
}

/// Radial smooth cut-off on the torus: identically 1 on the r_in ball around
/// `center`, identically 0 outside the r_out ball, values in [0,1].
inline GridFunction bump(int dim, std::array<int, 2> shape, Pt center,
                         double r_in, double r_out) {
  if (!(0.0 < r_in && r_in < r_out && r_out < kPi))
    throw StageError(Stage::kInput, "bump: need 0 < r_in < r_out < pi");
  return GridFunction::sample(dim, shape, [&](Pt p) {
    double d2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double d = wrap_delta(p[a] - center[a]);
      d2 += d * d;
    }
    return plateau_profile(std::sqrt(d2), r_in, r_out);
  });
}

/// Product of per-axis plateau profiles (rectangular cut-off); used by the
/// chart covers where per-axis extents differ.
inline GridFunction bump_box(int dim, std::array<int, 2> shape, Pt center,
                             Pt r_in, Pt r_out) {
  for (int a = 0; a < dim; ++a)
    if (!(0.0 < r_in[a] && r_in[a] < r_out[a] && r_out[a] <= kPi))
      throw StageError(Stage::kInput, "bump_box: bad radii");
  return GridFunction::sample(dim, shape, [&](Pt p) {
    double v = 1.0;
    for (int a = 0; a < dim; ++a)
      v *= plateau_profile(std::abs(wrap_delta(p[a] - center[a])), r_in[a],
                           r_out[a]);
    return v;
  });
}

}  // namespace torfact

#endif  // TORFACT_GRID_HPP
