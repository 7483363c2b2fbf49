// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_VECTOR_FIELD_HPP
#define TORFACT_VECTOR_FIELD_HPP

#include <vector>

#include "torfact/grid.hpp"

namespace torfact {

/// A smooth vector field on T^n: one GridFunction per component, all on the
/// same grid.
class VectorField {
 public:
  VectorField() = default;

  explicit VectorField(std::vector<GridFunction> comps)
      : comps_(std::move(comps)) {
    if (comps_.empty() || (int)comps_.size() != comps_[0].dim())
      throw StageError(Stage::kInput,
                       "component count must equal the dimension");
    for (const auto& c : comps_)
      if (!c.same_grid(comps_[0]))
        throw StageError(Stage::kInput, "component grids differ");
  }

  static VectorField sample(int dim, std::array<int, 2> shape,
                            const std::function<Pt(Pt)>& rule) {
    std::vector<GridFunction> comps;
    for (int a = 0; a < dim; ++a)
      comps.push_back(GridFunction::sample(
          dim, shape, [&, a](Pt p) { return rule(p)[a]; }));
    return VectorField(std::move(comps));
  }

  static VectorField constant(int dim, std::array<int, 2> shape, Pt v) {
    std::vector<GridFunction> comps;
    for (int a = 0; a < dim; ++a)
      comps.push_back(GridFunction::constant(dim, shape, v[a]));
    return VectorField(std::move(comps));
  }

  int dim() const { return (int)comps_.size(); }
  const std::array<int, 2>& shape() const { return comps_[0].shape(); }
  const GridFunction& comp(int a) const { return comps_[a]; }
  const std::vector<GridFunction>& comps() const { return comps_; }

  Pt evaluate(Pt p) const {
    Pt v{0.0, 0.0};
    for (int a = 0; a < dim(); ++a) v[a] = comps_[a].evaluate(p);
    return v;
  }

  /// Grid-sup of the Euclidean magnitude.
  double c0_norm() const {
    double m = 0.0;
    const int d = dim();
    for (size_t i = 0; i < comps_[0].size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        const double v = comps_[a].samples()[i];
        s += v * v;
      }
      m = std::max(m, s);
    }
    return std::sqrt(m);
  }

  friend VectorField operator*(const GridFunction& b, const VectorField& X) {
    std::vector<GridFunction> comps;
    for (int a = 0; a < X.dim(); ++a) comps.push_back(b * X.comp(a));
    return VectorField(std::move(comps));
  }

  friend VectorField operator*(double c, const VectorField& X) {
    std::vector<GridFunction> comps;
    for (int a = 0; a < X.dim(); ++a) comps.push_back(c * X.comp(a));
    return VectorField(std::move(comps));
  }

  friend VectorField operator-(const VectorField& A, const VectorField& B) {
    std::vector<GridFunction> comps;
    for (int a = 0; a < A.dim(); ++a) comps.push_back(A.comp(a) - B.comp(a));
    return VectorField(std::move(comps));
  }

 private:
  std::vector<GridFunction> comps_;
};

}  // namespace torfact

#endif  // TORFACT_VECTOR_FIELD_HPP
