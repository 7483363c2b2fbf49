// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_DIFFEO_HPP
#define TORFACT_DIFFEO_HPP

#include <memory>
#include <mutex>
#include <vector>

#include "torfact/fast_eval.hpp"
#include "torfact/grid.hpp"
#include "torfact/vector_field.hpp"

namespace torfact {

/// A diffeomorphism of T^n stored as identity + periodic displacement field.
/// Construction validates the near-identity invariants: displacement bounded
/// by pi and Jacobian determinant of id+displacement strictly positive (with
/// margin 1e-8) on a 2x spectrally refined grid.
class DiffeoGrid {
 public:
  DiffeoGrid() = default;

  static DiffeoGrid identity(int dim, std::array<int, 2> shape) {
    std::vector<GridFunction> d;
    for (int a = 0; a < dim; ++a) d.push_back(GridFunction::zeros(dim, shape));
    return DiffeoGrid(std::move(d), /*validate=*/false);
  }

  static DiffeoGrid from_displacement(std::vector<GridFunction> disp,
                                      bool validate = true) {
    return DiffeoGrid(std::move(disp), validate);
  }

  int dim() const { return (int)disp_.size(); }
  const std::array<int, 2>& shape() const { return disp_[0].shape(); }
  const GridFunction& displacement(int a) const { return disp_[a]; }
  const std::vector<GridFunction>& displacement() const { return disp_; }
  bool orientation_preserving() const { return orientation_; }

  bool same_grid(const DiffeoGrid& o) const {
    return dim() == o.dim() && shape() == o.shape();
  }

  Pt node(int i, int j = 0) const { return disp_[0].node(i, j); }

  /// Image of a grid node under the map, wrapped back to the torus.
  Pt node_image(int i, int j = 0) const {
    Pt p = node(i, j);
    const int n2 = dim() == 2 ? shape()[1] : 1;
    for (int a = 0; a < dim(); ++a)
      p[a] = wrap_angle(p[a] + disp_[a].samples()[(size_t)i * n2 + j]);
    return p;
  }

  /// Map a point (fast interpolated path).  The result is not wrapped.
  Pt apply(Pt p) const {
    const Cache& c = cache();
    Pt v = c.disp.eval(p);
    return Pt{p[0] + v[0], dim() == 2 ? p[1] + v[1] : 0.0};
  }

  /// Map a point through the exact trigonometric interpolant.
  Pt apply_exact(Pt p) const {
    Pt out{p[0], dim() == 2 ? p[1] : 0.0};
    for (int a = 0; a < dim(); ++a) out[a] += disp_[a].evaluate(p);
    return out;
  }

  /// Composition (*this) after `inner`:  x -> this(inner(x)).
  DiffeoGrid compose_after(const DiffeoGrid& inner) const {
    if (!same_grid(inner))
      throw StageError(Stage::kInput, "compose: grid mismatch");
    const Cache& c = cache();
    const int d = dim();
    const int n1 = shape()[0], n2 = d == 2 ? shape()[1] : 1;
    std::vector<std::vector<double>> nd(d,
                                        std::vector<double>((size_t)n1 * n2));
    for (int i = 0; i < n1; ++i) {
      for (int j = 0; j < n2; ++j) {
        const size_t idx = (size_t)i * n2 + j;
        Pt p{kTau * i / n1, kTau * j / n2};
        Pt q = p;
        for (int a = 0; a < d; ++a) q[a] += inner.disp_[a].samples()[idx];
        const Pt v = c.disp.eval(q);
        for (int a = 0; a < d; ++a)
          nd[a][idx] = wrap_delta((q[a] + v[a]) - p[a]);
      }
    }
    std::vector<GridFunction> comps;
    for (int a = 0; a < d; ++a)
      comps.push_back(
          GridFunction::from_samples(d, shape(), std::move(nd[a])));
    return DiffeoGrid(std::move(comps), /*validate=*/true);
  }

  /// Inverse point lookup: solves this(x) = y by damped Newton on the
  /// displacement, initial guess x = y - disp(y).  Tolerance 1e-12.
  Pt invert_point(Pt y, int max_iter = 50) const {
    const Cache& c = cache();
    const int d = dim();
    Pt x = y;
    {
      const Pt v = c.disp.eval(y);
      for (int a = 0; a < d; ++a) x[a] -= v[a];
    }
    auto residual = [&](const Pt& z, Pt* r) {
      const Pt v = c.disp.eval(z);
      double rmax = 0.0;
      for (int a = 0; a < d; ++a) {
        (*r)[a] = wrap_delta(z[a] + v[a] - y[a]);
        rmax = std::max(rmax, std::abs((*r)[a]));
      }
      return rmax;
    };
    Pt r{0.0, 0.0};
    double rmax = residual(x, &r);
    for (int it = 0; it < max_iter; ++it) {
      if (rmax <= 1e-12) return x;
      double J[2][2];
      c.jac.eval(x, J);
      for (int a = 0; a < d; ++a) J[a][a] += 1.0;
      const Pt s = solve2(J, r, d);
      double lam = 1.0;
      for (int bt = 0; bt < 25; ++bt) {
        Pt xn = x;
        for (int a = 0; a < d; ++a) xn[a] -= lam * s[a];
        Pt rn{0.0, 0.0};
        const double rn_max = residual(xn, &rn);
        if (rn_max < rmax || rn_max <= 1e-12) {
          x = xn;
          r = rn;
          rmax = rn_max;
          break;
        }
        lam *= 0.5;
      }
    }
    if (rmax <= 1e-12) return x;
    throw StageError(Stage::kInversion,
                     "point inversion did not converge in 50 iterations");
  }

  /// Full inverse as a DiffeoGrid (Newton at every node).
  DiffeoGrid inverse() const {
    const int d = dim();
    const int n1 = shape()[0], n2 = d == 2 ? shape()[1] : 1;
    std::vector<std::vector<double>> nd(d,
                                        std::vector<double>((size_t)n1 * n2));
    for (int i = 0; i < n1; ++i) {
      for (int j = 0; j < n2; ++j) {
        const Pt y{kTau * i / n1, kTau * j / n2};
        const Pt x = invert_point(y);
        for (int a = 0; a < d; ++a)
          nd[a][(size_t)i * n2 + j] = wrap_delta(x[a] - y[a]);
      }
    }
    std::vector<GridFunction> comps;
    for (int a = 0; a < d; ++a)
      comps.push_back(
          GridFunction::from_samples(d, shape(), std::move(nd[a])));
    return DiffeoGrid(std::move(comps), /*validate=*/true);
  }

  /// Minimum of det(I + D disp) on a spectrally 2x refined grid.
  double jacobian_min_det() const {
    const int d = dim();
    const std::array<int, 2> fine{shape()[0] * 2,
                                  d == 2 ? shape()[1] * 2 : 1};
    std::vector<GridFunction> dd;  // dd[a*d+b] = d disp_a / dx_b, refined
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        dd.push_back(disp_[a].derivative(b).resample(fine));
    double mind = 1e300;
    const size_t n = dd[0].size();
    for (size_t i = 0; i < n; ++i) {
      double det;
      if (d == 1) {
        det = 1.0 + dd[0].samples()[i];
      } else {
        const double a00 = 1.0 + dd[0].samples()[i];
        const double a01 = dd[1].samples()[i];
        const double a10 = dd[2].samples()[i];
        const double a11 = 1.0 + dd[3].samples()[i];
        det = a00 * a11 - a01 * a10;
      }
      mind = std::min(mind, det);
    }
    return mind;
  }

  /// Grid C0 distance: max Euclidean length of the (wrapped) displacement
  /// difference over nodes.
  friend double c0_distance(const DiffeoGrid& A, const DiffeoGrid& B) {
    if (!A.same_grid(B)) throw StageError(Stage::kInput, "c0: grid mismatch");
    double m = 0.0;
    const int d = A.dim();
    for (size_t i = 0; i < A.disp_[0].size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        const double v =
            wrap_delta(A.disp_[a].samples()[i] - B.disp_[a].samples()[i]);
        s += v * v;
      }
      m = std::max(m, s);
    }
    return std::sqrt(m);
  }

  /// C0 + max first-derivative deviation of the displacement difference.
  friend double c1_distance(const DiffeoGrid& A, const DiffeoGrid& B) {
    double m = c0_distance(A, B);
    for (int a = 0; a < A.dim(); ++a) {
      const GridFunction diff = A.disp_[a] - B.disp_[a];
      for (int b = 0; b < A.dim(); ++b)
        m = std::max(m, diff.derivative(b).max_abs());
    }
    return m;
  }

  double displacement_c0() const {
    double m = 0.0;
    for (const auto& g : disp_) m = std::max(m, g.max_abs());
    return m;
  }

  /// C1 size of the displacement (value and first derivatives).
  double displacement_c1() const {
    double m = displacement_c0();
    for (const auto& g : disp_)
      for (int b = 0; b < dim(); ++b)
        m = std::max(m, g.derivative(b).max_abs());
    return m;
  }

 private:
  struct Cache {
    FastField disp;
    FastJacobian jac;
  };

  DiffeoGrid(std::vector<GridFunction> disp, bool validate)
      : disp_(std::move(disp)) {
    if (disp_.empty() || (int)disp_.size() != disp_[0].dim())
      throw StageError(Stage::kInput, "displacement components vs dim");
    for (const auto& g : disp_)
      if (!g.same_grid(disp_[0]))
        throw StageError(Stage::kInput, "displacement grids differ");
    if (validate) {
      for (const auto& g : disp_)
        if (g.max_abs() > kPi)
          throw StageError(Stage::kInput,
                           "displacement exceeds pi (not near-identity)");
      const double mind = jacobian_min_det();
      if (!(mind >= 1e-8))
        throw StageError(Stage::kInversion,
                         "Jacobian determinant not positive (min " +
                             std::to_string(mind) + ")");
    }
    orientation_ = true;
  }

  static Pt solve2(const double J[2][2], const Pt& r, int d) {
    if (d == 1) return Pt{r[0] / J[0][0], 0.0};
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    return Pt{(r[0] * J[1][1] - r[1] * J[0][1]) / det,
              (r[1] * J[0][0] - r[0] * J[1][0]) / det};
  }

  struct CacheBox {
    std::once_flag once;
    std::shared_ptr<const Cache> cache;
  };

  const Cache& cache() const {
    std::call_once(box_->once, [this] {
      auto c = std::make_shared<Cache>();
      c->disp = FastField(VectorField(disp_));
      c->jac = FastJacobian(VectorField(disp_));
      box_->cache = std::move(c);
    });
    return *box_->cache;
  }

  std::vector<GridFunction> disp_;
  bool orientation_ = true;
  std::shared_ptr<CacheBox> box_ = std::make_shared<CacheBox>();
};

/// compose(f, g) = f after g.
inline DiffeoGrid compose(const DiffeoGrid& f, const DiffeoGrid& g) {
  return f.compose_after(g);
}

/// Sample f at the image of phi:  (f o phi)(x) = f(phi(x)).
/// Uses the fast interpolated path for phi and for f; exact at nodes when
/// phi is the identity.
inline GridFunction compose_with_map(const GridFunction& f,
                                     const DiffeoGrid& phi) {
  if (f.dim() != phi.dim())
    throw StageError(Stage::kInput, "compose_with_map: dim mismatch");
  GridFunction fr = f;
  if (!(f.shape() == phi.shape())) fr = f.resample(phi.shape());
  FastScalar fs(fr);
  const int n1 = phi.shape()[0], n2 = phi.dim() == 2 ? phi.shape()[1] : 1;
  std::vector<double> out((size_t)n1 * n2);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const size_t idx = (size_t)i * n2 + j;
      Pt p{kTau * i / n1, kTau * j / n2};
      bool moved = false;
      Pt q = p;
      for (int a = 0; a < phi.dim(); ++a) {
        const double v = phi.displacement(a).samples()[idx];
        if (v != 0.0) moved = true;
        q[a] += v;
      }
      out[idx] = moved ? fs.eval(q) : fr.at(i, j);
    }
  }
  return GridFunction::from_samples(phi.dim(), phi.shape(), std::move(out));
}

}  // namespace torfact

#endif  // TORFACT_DIFFEO_HPP
