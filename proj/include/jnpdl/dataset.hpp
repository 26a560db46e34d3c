#pragma once

#include "jnpdl/types.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace jnpdl {

/// Feature matrix (one sample per column) with zero-based class ids.
///
/// Class ids are dense in [0, num_classes) and every class owns at least one
/// column. File formats use one-based labels; conversion happens at the I/O
/// boundary.
template <typename Scalar>
struct LabeledDataset {
  Matrix<Scalar> features;
  std::vector<Index> labels;
  Index num_classes = 0;
  /// Column indices of each class, ascending.
  std::vector<std::vector<Index>> class_index;

  Index dim() const { return features.rows(); }
  Index size() const { return features.cols(); }
  Index class_size(Index c) const { return static_cast<Index>(class_index[c].size()); }
};

/// Validates and indexes a dataset. `num_classes` of 0 means max(label) + 1.
template <typename Scalar>
LabeledDataset<Scalar> make_dataset(Matrix<Scalar> features, std::vector<Index> labels,
                                    Index num_classes = 0) {
  require(static_cast<Index>(labels.size()) == features.cols(),
          "dataset: label count " + std::to_string(labels.size()) + " does not match sample count " +
              std::to_string(features.cols()));
  require(features.cols() > 0, "dataset: no samples");
  require(features.allFinite(), "dataset: non-finite feature value");
  Index k = num_classes;
  for (Index l : labels) {
    require(l >= 0, "dataset: negative class id");
    if (num_classes == 0) k = std::max(k, l + 1);
  }
  std::vector<std::vector<Index>> index(static_cast<std::size_t>(k));
  for (Index j = 0; j < static_cast<Index>(labels.size()); ++j) {
    require(labels[j] < k, "dataset: class id out of range");
    index[labels[j]].push_back(j);
  }
  for (Index c = 0; c < k; ++c) {
    require(!index[c].empty(), "dataset: class " + std::to_string(c + 1) + " has no samples");
  }
  return {std::move(features), std::move(labels), k, std::move(index)};
}

/// True when the columns of every class are contiguous and classes appear in id order.
template <typename Scalar>
bool is_grouped(const LabeledDataset<Scalar>& data) {
  return std::is_sorted(data.labels.begin(), data.labels.end());
}

/// Stable reorder so that class 0 comes first, then class 1, and so on.
template <typename Scalar>
LabeledDataset<Scalar> group_by_class(const LabeledDataset<Scalar>& data) {
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(data.size()));
  for (const auto& members : data.class_index) order.insert(order.end(), members.begin(), members.end());
  Matrix<Scalar> features(data.dim(), data.size());
  std::vector<Index> labels(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    features.col(static_cast<Index>(j)) = data.features.col(order[j]);
    labels[j] = data.labels[order[j]];
  }
  return make_dataset<Scalar>(std::move(features), std::move(labels), data.num_classes);
}

/// Per-class column ranges of a grouped dataset.
template <typename Scalar>
std::vector<ClassRange> class_ranges(const LabeledDataset<Scalar>& data) {
  require(is_grouped(data), "dataset: columns are not grouped by class");
  std::vector<Index> counts;
  for (const auto& members : data.class_index) counts.push_back(static_cast<Index>(members.size()));
  return ranges_from_counts(counts);
}

/// Splits each class into its first `train_per_class` columns and the rest.
template <typename Scalar>
std::pair<LabeledDataset<Scalar>, LabeledDataset<Scalar>> split_per_class(
    const LabeledDataset<Scalar>& data, Index train_per_class) {
  std::vector<Index> train_cols, test_cols;
  for (const auto& members : data.class_index) {
    require(static_cast<Index>(members.size()) > train_per_class,
            "split_per_class: class smaller than requested training size");
    for (std::size_t i = 0; i < members.size(); ++i) {
      (static_cast<Index>(i) < train_per_class ? train_cols : test_cols).push_back(members[i]);
    }
  }
  auto take = [&](const std::vector<Index>& cols) {
    Matrix<Scalar> f(data.dim(), static_cast<Index>(cols.size()));
    std::vector<Index> l(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      f.col(static_cast<Index>(j)) = data.features.col(cols[j]);
      l[j] = data.labels[cols[j]];
    }
    return make_dataset<Scalar>(std::move(f), std::move(l), data.num_classes);
  };
  return {take(train_cols), take(test_cols)};
}

}  // namespace jnpdl
