#pragma once

#include "jnpdl/dataset.hpp"

#include <cstdint>

namespace jnpdl {

struct SyntheticSpec {
  Index classes = 3;
  Index per_class = 30;
  Index dim = 20;
  double separation = 10.0;  ///< norm of every class mean before the shift
  double correlation = 0.0;  ///< off-diagonal level of the shared unit-variance covariance, in [0, 1)
  std::uint64_t seed = 0;    ///< fixes the class means
  std::uint64_t split = 0;   ///< independent sample draws from the same classes
};

/// Noise standard deviations added to the shift of every feature.
inline constexpr double kSyntheticMargin = 5.0;

/// Gaussian classes with random mean directions and equicorrelated unit
/// noise. Each feature is shifted by its smallest class-mean entry plus
/// kSyntheticMargin and clamped at zero. The means and the shift depend only
/// on `seed`, so different `split` values give train/test draws of one
/// problem. Columns are grouped by class.
LabeledDataset<double> generate_synthetic(const SyntheticSpec& spec);

}  // namespace jnpdl
