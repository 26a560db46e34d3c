#include "jnpdl/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>

namespace jnpdl {

LabeledDataset<double> generate_synthetic(const SyntheticSpec& spec) {
  require(spec.classes >= 1 && spec.per_class >= 1 && spec.dim >= 1, "synth: counts must be positive");
  require(spec.separation >= 0, "synth: separation must be non-negative");
  require(spec.correlation >= 0 && spec.correlation < 1, "synth: correlation must lie in [0, 1)");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd means(spec.dim, spec.classes);
  for (Index c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd v(spec.dim);
    do {
      for (Index i = 0; i < spec.dim; ++i) v(i) = normal(rng);
    } while (v.norm() == 0);
    means.col(c) = spec.separation * v.normalized();
  }

  auto words = [](std::uint64_t v) { return std::array<std::uint32_t, 2>{std::uint32_t(v), std::uint32_t(v >> 32)}; };
  const auto s = words(spec.seed), t = words(spec.split);
  std::seed_seq noise_seed{s[0], s[1], t[0], t[1], 1u};
  std::mt19937_64 noise(noise_seed);

  const double independent = std::sqrt(1.0 - spec.correlation);
  const double shared = std::sqrt(spec.correlation);
  Eigen::MatrixXd features(spec.dim, spec.classes * spec.per_class);
  std::vector<Index> labels;
  labels.reserve(static_cast<std::size_t>(features.cols()));
  for (Index c = 0; c < spec.classes; ++c) {
    for (Index n = 0; n < spec.per_class; ++n) {
      const Index col = c * spec.per_class + n;
      const double common = normal(noise);
      for (Index i = 0; i < spec.dim; ++i) {
        features(i, col) = means(i, c) + independent * normal(noise) + shared * common;
      }
      labels.push_back(c);
    }
  }
  const Eigen::VectorXd shift = (-means.rowwise().minCoeff()).array() + kSyntheticMargin;
  features = (features.colwise() + shift).cwiseMax(0.0);
  return make_dataset<double>(std::move(features), std::move(labels), spec.classes);
}

}  // namespace jnpdl
