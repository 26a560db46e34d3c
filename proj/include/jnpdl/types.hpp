#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace jnpdl {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Bad shapes, bad labels, bad parameters. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, singular systems, solver failures. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Contiguous half-open range of rows or columns owned by one class.
struct ClassRange {
  Index begin = 0;
  Index size = 0;

  Index end() const { return begin + size; }
  bool contains(Index i) const { return i >= begin && i < end(); }
};

/// Builds contiguous ranges from per-class counts.
inline std::vector<ClassRange> ranges_from_counts(const std::vector<Index>& counts) {
  std::vector<ClassRange> ranges;
  ranges.reserve(counts.size());
  Index offset = 0;
  for (Index c : counts) {
    ranges.push_back({offset, c});
    offset += c;
  }
  return ranges;
}

inline Index total_size(const std::vector<ClassRange>& ranges) {
  return ranges.empty() ? 0 : ranges.back().end();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

/// Scales every column to unit l2 norm. Zero columns are left untouched and counted.
template <typename Derived>
Index normalize_columns(Eigen::MatrixBase<Derived>& m) {
  Index zero_columns = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    const auto norm = m.col(j).norm();
    if (norm > 0) {
      m.col(j) /= norm;
    } else {
      ++zero_columns;
    }
  }
  return zero_columns;
}

template <typename Scalar>
Matrix<Scalar> positive_part(const Matrix<Scalar>& m) {
  return m.cwiseMax(Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> negative_part(const Matrix<Scalar>& m) {
  return (-m).cwiseMax(Scalar(0));
}

}  // namespace jnpdl
