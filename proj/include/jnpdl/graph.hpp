#pragma once

#include "jnpdl/types.hpp"

#include <algorithm>
#include <limits>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace jnpdl {

enum class GraphKind { intrinsic, penalty };

enum class Metric { euclidean, correlation };

/// How the inter-class neighbor sets of the penalty graph are chosen.
///  - per_sample: each sample links to its k nearest samples of other classes.
///  - per_class_pairs: each class links its k shortest (member, non-member) pairs.
enum class PenaltySelection { per_sample, per_class_pairs };

struct GraphParams {
  Index k_intrinsic = 5;
  Index k_penalty = 30;
  Metric metric = Metric::euclidean;
  PenaltySelection penalty_selection = PenaltySelection::per_sample;
  unsigned threads = 1;
};

/// Binary kNN similarity graph with its degree and Laplacian matrices.
template <typename Scalar>
struct DiscriminativeGraph {
  Matrix<Scalar> similarity;
  Matrix<Scalar> degree;
  Matrix<Scalar> laplacian;
  GraphKind kind = GraphKind::intrinsic;

  Index size() const { return similarity.rows(); }
};

/// Laplacians of an (intrinsic, penalty) graph pair over the same columns.
template <typename Scalar>
struct LaplacianPair {
  Matrix<Scalar> intrinsic;
  Matrix<Scalar> penalty;

  /// No graph terms: both Laplacians are zero.
  static LaplacianPair none(Index n) {
    return {Matrix<Scalar>::Zero(n, n), Matrix<Scalar>::Zero(n, n)};
  }
};

/// Intrinsic and penalty graphs built over the same columns.
template <typename Scalar>
struct GraphPair {
  DiscriminativeGraph<Scalar> intrinsic;
  DiscriminativeGraph<Scalar> penalty;

  LaplacianPair<Scalar> laplacians() const { return {intrinsic.laplacian, penalty.laplacian}; }
};

/// Pairwise distance matrix between columns. Euclidean distances are squared
/// (ranking only). Correlation distance is 1 - cos; zero columns are infinitely far.
template <typename Scalar>
Matrix<Scalar> pairwise_distances(const Matrix<Scalar>& features, Metric metric, unsigned threads = 1) {
  const Index n = features.cols();
  Matrix<Scalar> dist = Matrix<Scalar>::Zero(n, n);
  Vector<Scalar> norms = features.colwise().norm().transpose();
  auto fill_rows = [&](Index first, Index last) {
    for (Index i = first; i < last; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (metric == Metric::euclidean) {
          dist(i, j) = (features.col(i) - features.col(j)).squaredNorm();
        } else if (norms(i) == 0 || norms(j) == 0) {
          dist(i, j) = std::numeric_limits<Scalar>::infinity();
        } else {
          dist(i, j) = Scalar(1) - features.col(i).dot(features.col(j)) / (norms(i) * norms(j));
        }
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    fill_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    const Index chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const Index first = std::min<Index>(n, w * chunk);
      const Index last = std::min<Index>(n, first + chunk);
      pool.emplace_back(fill_rows, first, last);
    }
    for (auto& t : pool) t.join();
  }
  return dist;
}

/// Degree and Laplacian of a symmetric, non-negative similarity matrix.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> laplacian_of(const Matrix<Scalar>& similarity) {
  require(similarity.rows() == similarity.cols(), "laplacian_of: similarity matrix is not square");
  require(similarity == similarity.transpose(), "laplacian_of: similarity matrix is not symmetric");
  require((similarity.array() >= 0).all(), "laplacian_of: negative similarity");
  require(similarity.diagonal().isZero(0), "laplacian_of: non-zero diagonal");
  Matrix<Scalar> degree = similarity.rowwise().sum().asDiagonal();
  Matrix<Scalar> laplacian = degree - similarity;
  return {std::move(degree), std::move(laplacian)};
}

namespace detail {

template <typename Scalar>
void check_graph_inputs(const Matrix<Scalar>& features, const std::vector<Index>& labels) {
  require(static_cast<Index>(labels.size()) == features.cols(),
          "graph: " + std::to_string(features.cols()) + " feature columns but " +
              std::to_string(labels.size()) + " labels");
  require(features.allFinite(), "graph: non-finite feature value");
  for (Index l : labels) require(l >= 0, "graph: negative class id");
}

/// Candidates ordered by (distance, column index).
template <typename Scalar>
std::vector<Index> nearest(const Matrix<Scalar>& dist, Index i, std::vector<Index> candidates, Index k) {
  const auto take = std::min<Index>(k, static_cast<Index>(candidates.size()));
  std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(), [&](Index a, Index b) {
    return std::tie(dist(i, a), a) < std::tie(dist(i, b), b);
  });
  candidates.resize(static_cast<std::size_t>(take));
  return candidates;
}

template <typename Scalar>
DiscriminativeGraph<Scalar> finish(Matrix<Scalar> similarity, GraphKind kind) {
  auto [degree, laplacian] = laplacian_of(similarity);
  return {std::move(similarity), std::move(degree), std::move(laplacian), kind};
}

}  // namespace detail

/// Links every sample to its `k_intrinsic` nearest same-class samples (symmetrized OR).
template <typename Scalar>
DiscriminativeGraph<Scalar> build_intrinsic_graph(const Matrix<Scalar>& features,
                                                  const std::vector<Index>& labels,
                                                  const GraphParams& params) {
  detail::check_graph_inputs(features, labels);
  require(params.k_intrinsic >= 1, "graph: k_intrinsic must be positive");
  const Index n = features.cols();
  const Matrix<Scalar> dist = pairwise_distances(features, params.metric, params.threads);
  Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> same;
    for (Index j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) same.push_back(j);
    }
    for (Index j : detail::nearest(dist, i, std::move(same), params.k_intrinsic)) {
      w(i, j) = w(j, i) = Scalar(1);
    }
  }
  return detail::finish(std::move(w), GraphKind::intrinsic);
}

/// Links samples to their nearest samples of other classes (see PenaltySelection).
template <typename Scalar>
DiscriminativeGraph<Scalar> build_penalty_graph(const Matrix<Scalar>& features,
                                                const std::vector<Index>& labels,
                                                const GraphParams& params) {
  detail::check_graph_inputs(features, labels);
  require(params.k_penalty >= 1, "graph: k_penalty must be positive");
  const Index n = features.cols();
  bool multi_class = false;
  require(n > 0, "graph: no samples");
  for (Index l : labels) multi_class = multi_class || l != labels.front();
  require(multi_class, "graph: penalty graph needs at least two classes");

  const Matrix<Scalar> dist = pairwise_distances(features, params.metric, params.threads);
  Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
  if (params.penalty_selection == PenaltySelection::per_sample) {
    for (Index i = 0; i < n; ++i) {
      std::vector<Index> other;
      for (Index j = 0; j < n; ++j) {
        if (labels[j] != labels[i]) other.push_back(j);
      }
      for (Index j : detail::nearest(dist, i, std::move(other), params.k_penalty)) {
        w(i, j) = w(j, i) = Scalar(1);
      }
    }
  } else {
    std::vector<Index> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    for (Index c : classes) {
      std::vector<std::pair<Index, Index>> pairs;
      for (Index i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        for (Index j = 0; j < n; ++j) {
          if (labels[j] != c) pairs.emplace_back(i, j);
        }
      }
      const auto take = std::min<Index>(params.k_penalty, static_cast<Index>(pairs.size()));
      std::partial_sort(pairs.begin(), pairs.begin() + take, pairs.end(), [&](const auto& a, const auto& b) {
        return std::tie(dist(a.first, a.second), a.first, a.second) <
               std::tie(dist(b.first, b.second), b.first, b.second);
      });
      for (Index p = 0; p < take; ++p) {
        const auto [i, j] = pairs[static_cast<std::size_t>(p)];
        w(i, j) = w(j, i) = Scalar(1);
      }
    }
  }
  return detail::finish(std::move(w), GraphKind::penalty);
}

/// Sum over ordered pairs i != j of W_ij * ||z_i - z_j||^2, evaluated pair by pair.
template <typename Scalar>
Scalar pairwise_spread(const Matrix<Scalar>& z, const Matrix<Scalar>& similarity) {
  Scalar total = 0;
  for (Index i = 0; i < z.cols(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) {
      if (i != j && similarity(i, j) != 0) total += similarity(i, j) * (z.col(i) - z.col(j)).squaredNorm();
    }
  }
  return total;
}

/// Tr(Z L Z^T) for columns-as-samples Z.
template <typename Scalar>
Scalar laplacian_trace(const Matrix<Scalar>& z, const Matrix<Scalar>& laplacian) {
  return (z * laplacian).cwiseProduct(z).sum();
}

}  // namespace jnpdl
