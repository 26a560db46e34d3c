#pragma once

#include "jnpdl/model.hpp"

#include <random>
#include <vector>

namespace jnpdl {

/// Uniform [0,1) entries, columns scaled to unit norm. Deterministic per seed.
template <typename Scalar>
Matrix<Scalar> random_unit_columns(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix<Scalar> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = Scalar(uniform(rng));
  }
  // An all-zero draw is possible only in theory; give it a flat direction.
  for (Index j = 0; j < cols; ++j) {
    if (m.col(j).norm() == 0) m.col(j).setOnes();
  }
  normalize_columns(m);
  return m;
}

template <typename Scalar>
Dictionary<Scalar> init_dictionary(Index dim, const std::vector<Index>& atoms_per_class, std::uint64_t seed) {
  require(dim >= 1, "init_dictionary: dimension must be positive");
  require(!atoms_per_class.empty(), "init_dictionary: no classes");
  for (Index a : atoms_per_class) require(a >= 1, "init_dictionary: every class needs at least one atom");
  auto ranges = ranges_from_counts(atoms_per_class);
  return {random_unit_columns<Scalar>(dim, total_size(ranges), seed), std::move(ranges)};
}

/// F(D) = ||Z - DX||^2 + sum_i ||Z_i - D_i X_i^i||^2 + sum_i sum_{j != i} ||D_j X_i^j||^2.
template <typename Scalar>
Scalar dictionary_objective(const Dictionary<Scalar>& dict, const Matrix<Scalar>& projected,
                            const CodingMatrix<Scalar>& coding) {
  return reconstruction_terms(projected, dict, coding).total();
}

/// Gradient of F with respect to the atoms (no sphere constraint).
template <typename Scalar>
Matrix<Scalar> dictionary_gradient(const Dictionary<Scalar>& dict, const Matrix<Scalar>& projected,
                                   const CodingMatrix<Scalar>& coding) {
  check_coding_layout(projected, dict, coding);
  Matrix<Scalar> grad = 2 * (dict.atoms * coding.coeffs - projected) * coding.coeffs.transpose();
  for (Index i = 0; i < coding.num_classes(); ++i) {
    const auto& cols = coding.sample_ranges[i];
    for (Index j = 0; j < coding.num_classes(); ++j) {
      const auto& atoms = coding.atom_ranges[j];
      Matrix<Scalar> residual = dict.sub(j) * coding.block(i, j);
      if (i == j) residual -= projected.middleCols(cols.begin, cols.size);
      grad.middleCols(atoms.begin, atoms.size) += 2 * residual * coding.block(i, j).transpose();
    }
  }
  return grad;
}

template <typename Scalar>
struct DictionaryUpdate {
  Dictionary<Scalar> dictionary;
  Scalar objective_before = 0;
  Scalar objective_after = 0;
  Index skipped_atoms = 0;  ///< atoms with (near) zero coefficient rows
  Index reverted_atoms = 0; ///< atoms whose normalized update increased F
};

/// One ascending sweep of per-atom block coordinate descent on F.
///
/// For atom k of class j, F restricted to d_k is c ||d_k||^2 - 2 d_k' v + const,
/// with c the squared coefficient mass of row k over the global, local and
/// cross terms. On the unit sphere the minimizer is v / ||v||.
template <typename Scalar>
DictionaryUpdate<Scalar> update_dictionary(const Dictionary<Scalar>& dict, const Matrix<Scalar>& projected,
                                           const CodingMatrix<Scalar>& coding) {
  check_coding_layout(projected, dict, coding);
  if (!projected.allFinite() || !coding.coeffs.allFinite()) throw NumericalError("update_dictionary: non-finite input");

  DictionaryUpdate<Scalar> out;
  out.dictionary = dict;
  Matrix<Scalar>& d = out.dictionary.atoms;
  const Matrix<Scalar>& x = coding.coeffs;
  out.objective_before = dictionary_objective(out.dictionary, projected, coding);
  Scalar current = out.objective_before;

  for (Index j = 0; j < dict.num_classes(); ++j) {
    const auto& own_atoms = dict.class_ranges[j];
    const auto& own_cols = coding.sample_ranges[j];
    for (Index k = own_atoms.begin; k < own_atoms.end(); ++k) {
      const auto row = x.row(k);
      const Scalar c_global = row.squaredNorm();
      const Scalar c_local = row.segment(own_cols.begin, own_cols.size).squaredNorm();
      const Scalar c_cross = c_global - c_local;
      const Scalar c = c_global + c_local + c_cross;
      if (c < Scalar(1e-12)) {
        ++out.skipped_atoms;
        continue;
      }

      Vector<Scalar> v = (projected - d * x) * row.transpose();
      const auto d_own = d.middleCols(own_atoms.begin, own_atoms.size);
      const auto x_own = x.block(own_atoms.begin, own_cols.begin, own_atoms.size, own_cols.size);
      v += (projected.middleCols(own_cols.begin, own_cols.size) - d_own * x_own) *
           row.segment(own_cols.begin, own_cols.size).transpose();
      for (Index i = 0; i < coding.num_classes(); ++i) {
        if (i == j) continue;
        const auto& cols = coding.sample_ranges[i];
        v -= d_own * (x.block(own_atoms.begin, cols.begin, own_atoms.size, cols.size) *
                      row.segment(cols.begin, cols.size).transpose());
      }
      v += c * d.col(k);

      const Scalar norm = v.norm();
      if (!(norm > 0)) {
        ++out.skipped_atoms;
        continue;
      }
      const Vector<Scalar> previous = d.col(k);
      d.col(k) = v / norm;
      const Scalar value = dictionary_objective(out.dictionary, projected, coding);
      if (!std::isfinite(double(value))) throw NumericalError("update_dictionary: non-finite objective");
      if (value > current) {
        d.col(k) = previous;
        ++out.reverted_atoms;
      } else {
        current = value;
      }
    }
  }
  out.objective_after = current;
  return out;
}

}  // namespace jnpdl
