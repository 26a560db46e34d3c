#pragma once

#include "jnpdl/trainer.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace fixture {

using namespace jnpdl;

/// A random problem with class-grouped samples and a class-structured dictionary.
struct Instance {
  Matrix<double> samples;  ///< s x N, non-negative
  std::vector<Index> labels;
  Dictionary<double> dict;
  CodingMatrix<double> coding;
  ProjectionModel<double> projection;
  GraphPair<double> graphs;  ///< built on raw samples

  std::vector<Index> atom_class() const {
    std::vector<Index> out;
    for (Index c = 0; c < dict.num_classes(); ++c)
      for (Index a = 0; a < dict.class_ranges[c].size; ++a) out.push_back(c);
    return out;
  }
};

inline Instance make_instance(std::uint64_t seed, Index s = 6, Index s_p = 4, Index q = 2,
                              std::vector<Index> per_class = {5, 5}, std::vector<Index> atoms = {2, 2}) {
  std::mt19937_64 rng(seed);
  Instance in;
  Index n = 0;
  for (Index c = 0; c < static_cast<Index>(per_class.size()); ++c) {
    for (Index j = 0; j < per_class[c]; ++j) in.labels.push_back(c);
    n += per_class[c];
  }
  in.samples = oracle::random_matrix(s, n, rng, 0, 1);
  in.dict = init_dictionary<double>(s_p, atoms, seed + 17);
  in.coding = {oracle::random_matrix(in.dict.num_atoms(), n, rng), ranges_from_counts(per_class), in.dict.class_ranges};
  in.projection.M = oracle::unit_columns(oracle::random_matrix(s, s_p, rng, 0.05, 1));
  in.projection.P = oracle::random_matrix(s_p, s, rng, 0.05, 1);
  in.projection.q = q;
  GraphParams gp;
  gp.k_intrinsic = 2;
  gp.k_penalty = 3;
  in.graphs = {build_intrinsic_graph(in.samples, in.labels, gp), build_penalty_graph(in.samples, in.labels, gp)};
  return in;
}

/// Separable non-negative Gaussian blobs, one sample per column, grouped by class.
inline LabeledDataset<double> blobs(std::uint64_t seed, Index classes, Index per_class, Index dim, double spread = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  Matrix<double> centers = oracle::random_matrix(dim, classes, rng, 0, 1) * 3.0;
  Matrix<double> f(dim, classes * per_class);
  std::vector<Index> labels;
  for (Index c = 0; c < classes; ++c)
    for (Index j = 0; j < per_class; ++j) {
      for (Index i = 0; i < dim; ++i) f(i, c * per_class + j) = std::max(0.0, centers(i, c) + 3.0 + noise(rng));
      labels.push_back(c);
    }
  return make_dataset<double>(std::move(f), std::move(labels), classes);
}

/// Global and local reconstruction, sample by sample.
inline double projection_reconstruction(const Instance& in, const Eigen::MatrixXd& z) {
  const auto atom_class = in.atom_class();
  double total = 0;
  for (Index n = 0; n < z.cols(); ++n) {
    Eigen::VectorXd global = z.col(n), local = z.col(n);
    for (Index a = 0; a < in.dict.num_atoms(); ++a) {
      global -= in.dict.atoms.col(a) * in.coding.coeffs(a, n);
      if (atom_class[a] == in.labels[n]) local -= in.dict.atoms.col(a) * in.coding.coeffs(a, n);
    }
    total += global.squaredNorm() + local.squaredNorm();
  }
  return total;
}

/// Objective of P and M with every graph term written as a pairwise sum.
inline double projection_objective_oracle(const Instance& in, const Eigen::MatrixXd& p, const Eigen::MatrixXd& m,
                                          Index q, double alpha1, double beta) {
  const Eigen::MatrixXd& y = in.samples;
  const Eigen::MatrixXd z = oracle::naive_matmul(p, y);
  const double self = (y - oracle::naive_matmul(m, z)).squaredNorm();
  const double embed = oracle::pair_spread(z.topRows(q), in.graphs.intrinsic.similarity) / 2;
  const double comp = oracle::pair_spread(z.bottomRows(z.rows() - q), in.graphs.penalty.similarity) / 2;
  return projection_reconstruction(in, z) +
         alpha1 * (self + beta * embed + beta * comp + (m - p.transpose()).squaredNorm());
}

/// Smooth part of the coefficient objective written with pairwise sums.
inline double coefficient_smooth_oracle(const Instance& in, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                                        const LaplacianPair<double>& graphs, double alpha2, double eta) {
  const Eigen::MatrixXd wc = -graphs.intrinsic + Eigen::MatrixXd(graphs.intrinsic.diagonal().asDiagonal());
  const Eigen::MatrixXd wp = -graphs.penalty + Eigen::MatrixXd(graphs.penalty.diagonal().asDiagonal());
  return oracle::reconstruction(z, in.dict.atoms, x, in.labels, in.atom_class()) +
         alpha2 * 0.5 * (oracle::pair_spread(x, wc) - oracle::pair_spread(x, wp)) + eta * x.squaredNorm();
}

/// Largest violation of the lasso optimality conditions for ||z - Dx||^2 + lambda |x|_1.
inline double lasso_kkt(const Eigen::MatrixXd& d, const Eigen::VectorXd& z, double lambda, const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = 2 * d.transpose() * (d * x - z);
  double worst = 0;
  for (Index k = 0; k < x.size(); ++k) {
    worst = std::max(worst, x(k) == 0 ? std::max(0.0, std::abs(grad(k)) - lambda)
                                      : std::abs(grad(k) + lambda * (x(k) > 0 ? 1 : -1)));
  }
  return worst;
}

}  // namespace fixture
