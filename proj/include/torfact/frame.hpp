// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_FRAME_HPP
#define TORFACT_FRAME_HPP

#include <string>
#include <vector>

#include "torfact/flow.hpp"

namespace torfact {

/// The generating family F: named vector fields on a common grid.
struct Family {
  std::vector<VectorField> fields;
  std::vector<std::string> names;

  int dim() const { return fields.at(0).dim(); }
  std::array<int, 2> shape() const { return fields.at(0).shape(); }

  void validate() const {
    if (fields.empty()) throw StageError(Stage::kInput, "empty family");
    if (names.size() != fields.size())
      throw StageError(Stage::kInput, "family names/fields mismatch");
    for (const auto& f : fields)
      if (f.dim() != dim() || !(f.shape() == shape()))
        throw StageError(Stage::kInput, "family fields on different grids");
  }

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return (int)i;
    throw StageError(Stage::kInput, "unknown family field: " + name);
  }
};

/// One primitive move: the diffeomorphism e^{a f_k} for a family field f_k.
struct Factor {
  GridFunction a;
  int field = 0;
  std::string provenance;  // which pipeline stage produced it

  double a_c1() const { return a.ck_norm(1); }
};

/// An ordered composition F_1 o F_2 o ... o F_k (leftmost applied last).
struct FactorList {
  std::vector<Factor> factors;

  bool empty() const { return factors.empty(); }
  size_t size() const { return factors.size(); }
  void append(const FactorList& other) {
    factors.insert(factors.end(), other.factors.begin(), other.factors.end());
  }
  void append(Factor f) { factors.push_back(std::move(f)); }
};

/// Left-to-right composition per the documented order: [F1,...,Fk] maps x to
/// F1(F2(...Fk(x))).
inline DiffeoGrid recompose(const FactorList& list, const Family& family,
                            const FlowConfig& cfg = {}) {
  family.validate();
  DiffeoGrid acc = DiffeoGrid::identity(family.dim(), family.shape());
  for (auto it = list.factors.rbegin(); it != list.factors.rend(); ++it) {
    const DiffeoGrid step = scaled_flow(it->a, family.fields.at(it->field), cfg);
    acc = compose(step, acc);
  }
  return acc;
}

/// The inverse composition: reversed order with negated rescalings, since
/// (e^{af})^{-1} = e^{(-a)f} (time reversal of the autonomous flow of a*f).
inline FactorList inverse_list(const FactorList& list) {
  FactorList inv;
  for (auto it = list.factors.rbegin(); it != list.factors.rend(); ++it) {
    inv.factors.push_back(
        Factor{-1.0 * it->a, it->field, it->provenance + "-inv"});
  }
  return inv;
}

/// A frame at q: witnesses P_i (as family words), family indices f_i, and
/// the transported fields X_i = (P_i)_* f_i whose values at q span.
struct Frame {
  Pt q{0.0, 0.0};
  std::vector<FactorList> witnesses;
  std::vector<int> field_indices;
  std::vector<VectorField> X;
  double cond = 1.0;

  int dim() const { return (int)X.size(); }
};

/// Rewrite the factor e^{a X_i} with X_i = (P_i)_* f_i over the family:
/// e^{a (P_*f)} = P o e^{(a o P) f} o P^{-1}.  The witness word and its
/// inverse sandwich a single family move.
inline FactorList conjugate_factor(const GridFunction& a,
                                   const FactorList& witness, int field_index,
                                   const Family& family,
                                   const FlowConfig& cfg = {},
                                   bool validate = false,
                                   double tol = 1e-8) {
  FactorList out;
  if (witness.empty()) {
    out.append(Factor{a, field_index, "conjugate"});
  } else {
    const DiffeoGrid P = recompose(witness, family, cfg);
    out = witness;
    out.append(Factor{compose_with_map(a, P), field_index, "conjugate"});
    out.append(inverse_list(witness));
  }
  if (validate) {
    const DiffeoGrid P = recompose(witness, family, cfg);
    const VectorField Xi =
        witness.empty() ? family.fields.at(field_index)
                        : pushforward(P, family.fields.at(field_index));
    const double r =
        c0_distance(recompose(out, family, cfg), scaled_flow(a, Xi, cfg));
    if (!(r <= tol))
      throw StageError(Stage::kAssemble,
                       "conjugated factor failed validation: residual " +
                           std::to_string(r));
  }
  return out;
}

}  // namespace torfact

#endif  // TORFACT_FRAME_HPP
