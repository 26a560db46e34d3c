#pragma once

#include "jnpdl/types.hpp"

#include <vector>

namespace jnpdl {

/// Class-structured dictionary. Atoms are unit-norm columns; class `i` owns
/// the contiguous atom range `class_ranges[i]`.
template <typename Scalar>
struct Dictionary {
  Matrix<Scalar> atoms;
  std::vector<ClassRange> class_ranges;

  Index dim() const { return atoms.rows(); }
  Index num_atoms() const { return atoms.cols(); }
  Index num_classes() const { return static_cast<Index>(class_ranges.size()); }

  auto sub(Index c) const { return atoms.middleCols(class_ranges[c].begin, class_ranges[c].size); }
};

/// Coding coefficients of the training samples, one column per sample.
///
/// Samples are grouped by class (`sample_ranges`) and atoms by class
/// (`atom_ranges`); `block(i, j)` is the part of class-i samples coded over
/// class-j atoms.
template <typename Scalar>
struct CodingMatrix {
  Matrix<Scalar> coeffs;
  std::vector<ClassRange> sample_ranges;
  std::vector<ClassRange> atom_ranges;

  Index num_classes() const { return static_cast<Index>(sample_ranges.size()); }

  auto block(Index samples_of, Index atoms_of) const {
    const auto& s = sample_ranges[samples_of];
    const auto& a = atom_ranges[atoms_of];
    return coeffs.block(a.begin, s.begin, a.size, s.size);
  }
  auto block(Index samples_of, Index atoms_of) {
    const auto& s = sample_ranges[samples_of];
    const auto& a = atom_ranges[atoms_of];
    return coeffs.block(a.begin, s.begin, a.size, s.size);
  }
};

/// Non-negative projection P (s_p x s) and basis M (s x s_p). The first `q`
/// rows of P form the embedding part, the rest the complement.
template <typename Scalar>
struct ProjectionModel {
  Matrix<Scalar> P;
  Matrix<Scalar> M;
  Index q = 1;

  Index input_dim() const { return P.cols(); }
  Index output_dim() const { return P.rows(); }

  auto embedding() const { return P.topRows(q); }
  auto complement() const { return P.bottomRows(P.rows() - q); }
};

template <typename Scalar>
void check_projection_model(const ProjectionModel<Scalar>& model) {
  require(model.M.rows() == model.P.cols() && model.M.cols() == model.P.rows(),
          "projection: M must be s x s_p for P of shape s_p x s");
  require(model.q >= 1 && model.q < model.P.rows(), "projection: split q must satisfy 1 <= q < s_p");
  require((model.P.array() >= 0).all() && (model.M.array() >= 0).all(),
          "projection: P and M must be non-negative");
}

template <typename Scalar>
void check_coding_layout(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                         const CodingMatrix<Scalar>& coding) {
  require(projected.rows() == dict.dim(), "coding: projected samples and dictionary disagree on s_p");
  require(coding.coeffs.rows() == dict.num_atoms(), "coding: coefficient rows must equal atom count");
  require(coding.coeffs.cols() == projected.cols(), "coding: coefficient columns must equal sample count");
  require(coding.num_classes() == dict.num_classes(), "coding: class count mismatch with dictionary");
  require(total_size(coding.sample_ranges) == projected.cols(), "coding: sample ranges do not cover samples");
  for (Index c = 0; c < dict.num_classes(); ++c) {
    require(coding.atom_ranges[c].begin == dict.class_ranges[c].begin &&
                coding.atom_ranges[c].size == dict.class_ranges[c].size,
            "coding: atom ranges differ from dictionary class ranges");
  }
}

/// The three parts of the discriminative reconstruction error.
template <typename Scalar>
struct ReconstructionTerms {
  Scalar global = 0;  ///< ||Z - D X||^2
  Scalar local = 0;   ///< sum_i ||Z_i - D_i X_i^i||^2
  Scalar cross = 0;   ///< sum_i sum_{j != i} ||D_j X_i^j||^2

  Scalar total() const { return global + local + cross; }
};

/// Discriminative reconstruction error of projected samples Z = P Y.
template <typename Scalar>
ReconstructionTerms<Scalar> reconstruction_terms(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                                                 const CodingMatrix<Scalar>& coding) {
  check_coding_layout(projected, dict, coding);
  ReconstructionTerms<Scalar> t;
  t.global = (projected - dict.atoms * coding.coeffs).squaredNorm();
  for (Index i = 0; i < coding.num_classes(); ++i) {
    const auto& cols = coding.sample_ranges[i];
    for (Index j = 0; j < coding.num_classes(); ++j) {
      const Matrix<Scalar> part = dict.sub(j) * coding.block(i, j);
      if (i == j) {
        t.local += (projected.middleCols(cols.begin, cols.size) - part).squaredNorm();
      } else {
        t.cross += part.squaredNorm();
      }
    }
  }
  return t;
}

/// Column n of the output is D_c x_n restricted to the atoms of the sample's own class c.
template <typename Scalar>
Matrix<Scalar> own_class_reconstruction(const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding) {
  Matrix<Scalar> out(dict.dim(), coding.coeffs.cols());
  for (Index c = 0; c < coding.num_classes(); ++c) {
    const auto& cols = coding.sample_ranges[c];
    out.middleCols(cols.begin, cols.size) = dict.sub(c) * coding.block(c, c);
  }
  return out;
}

}  // namespace jnpdl
