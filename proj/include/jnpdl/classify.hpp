#pragma once

#include "jnpdl/coder.hpp"
#include "jnpdl/trainer.hpp"

#include <optional>
#include <thread>
#include <vector>

namespace jnpdl {

enum class SetMode { l1, l2_fast };

struct ClassifierParams {
  double sigma = 0.05;
  double lambda1 = 5e-6;
  double lambda2 = 1e-3;
  SetMode set_mode = SetMode::l2_fast;
  unsigned threads = 1;
};

template <typename Scalar>
struct Classification {
  Index label = 0;       ///< zero-based class id
  Vector<Scalar> scores; ///< one per class, lower is better
};

template <typename Scalar>
struct SetClassification {
  Index label = 0;
  std::vector<Index> histogram;    ///< votes per class
  std::vector<Index> frame_labels;
};

/// First index of the smallest score.
template <typename Derived>
Index argmin_lowest(const Eigen::MatrixBase<Derived>& scores) {
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i) {
    if (scores(i) < scores(best)) best = i;
  }
  return best;
}

/// Most voted class; ties go to the lowest class id.
inline Index majority_vote(const std::vector<Index>& histogram) {
  Index best = 0;
  for (Index i = 1; i < static_cast<Index>(histogram.size()); ++i) {
    if (histogram[i] > histogram[best]) best = i;
  }
  return best;
}

/// Test-time classifier over a trained model. Coders are factorized once.
template <typename Scalar>
class Classifier {
public:
  Classifier(const TrainedModel<Scalar>& model, const ClassifierParams& params)
      : projection_(model.projection.P), dict_(model.dictionary), means_(model.class_means), params_(params) {
    require(params.sigma >= 0 && params.lambda1 >= 0 && params.lambda2 >= 0,
            "classifier: sigma, lambda1 and lambda2 must be non-negative");
    require(means_.rows() == dict_.num_atoms() && means_.cols() == dict_.num_classes(),
            "classifier: class means do not match the dictionary");
  }

  Index num_classes() const { return dict_.num_classes(); }

  /// l1 coding of the projected sample, then
  /// argmin_i ||Py - D_i x_i||^2 + sigma ||x - m_i||^2.
  Classification<Scalar> classify_sample(const Vector<Scalar>& raw) const {
    const Vector<Scalar> z = project_checked(raw);
    const Vector<Scalar> x = l1_coder().code(z);
    Classification<Scalar> out;
    out.scores.resize(num_classes());
    for (Index c = 0; c < num_classes(); ++c) {
      out.scores(c) = class_residual(z, x, c) + Scalar(params_.sigma) * (x - means_.col(c)).squaredNorm();
    }
    out.label = argmin_lowest(out.scores);
    return out;
  }

  /// Ridge coding x = (D'D + lambda2 I)^{-1} D' P y, then argmin_i ||Py - D_i x_i||^2.
  Classification<Scalar> classify_frame_fast(const Vector<Scalar>& raw) const {
    const Vector<Scalar> z = project_checked(raw);
    const Vector<Scalar> x = ridge_coder().code(z);
    Classification<Scalar> out;
    out.scores.resize(num_classes());
    for (Index c = 0; c < num_classes(); ++c) out.scores(c) = class_residual(z, x, c);
    out.label = argmin_lowest(out.scores);
    return out;
  }

  Index classify_frame(const Vector<Scalar>& raw) const {
    return params_.set_mode == SetMode::l1 ? classify_sample(raw).label : classify_frame_fast(raw).label;
  }

  /// Per-frame labels followed by a majority vote.
  SetClassification<Scalar> classify_set(const Matrix<Scalar>& frames) const {
    require(frames.cols() >= 1, "classify_set: empty frame set");
    SetClassification<Scalar> out;
    out.frame_labels.assign(static_cast<std::size_t>(frames.cols()), 0);
    // build coders before fanning out
    if (params_.set_mode == SetMode::l1) {
      l1_coder();
    } else {
      ridge_coder();
    }
    auto run = [&](Index first, Index last) {
      for (Index j = first; j < last; ++j) out.frame_labels[j] = classify_frame(frames.col(j));
    };
    const unsigned workers =
        std::max(1u, std::min<unsigned>(params_.threads, static_cast<unsigned>(frames.cols())));
    if (workers == 1) {
      run(0, frames.cols());
    } else {
      std::vector<std::thread> pool;
      const Index chunk = (frames.cols() + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const Index first = std::min<Index>(frames.cols(), w * chunk);
        pool.emplace_back(run, first, std::min<Index>(frames.cols(), first + chunk));
      }
      for (auto& t : pool) t.join();
    }
    out.histogram.assign(static_cast<std::size_t>(num_classes()), 0);
    for (Index l : out.frame_labels) ++out.histogram[l];
    out.label = majority_vote(out.histogram);
    return out;
  }

  /// Coefficients used by the classifiers (l1 or ridge), for export.
  Vector<Scalar> code(const Vector<Scalar>& raw, SetMode mode) const {
    const Vector<Scalar> z = project_checked(raw);
    return mode == SetMode::l1 ? l1_coder().code(z) : Vector<Scalar>(ridge_coder().code(z));
  }

private:
  Vector<Scalar> project_checked(const Vector<Scalar>& raw) const {
    require(raw.size() == projection_.cols(), "classify: sample has dimension " + std::to_string(raw.size()) +
                                                  ", model expects " + std::to_string(projection_.cols()));
    return projection_ * raw;
  }

  Scalar class_residual(const Vector<Scalar>& z, const Vector<Scalar>& x, Index c) const {
    const auto& r = dict_.class_ranges[c];
    return (z - dict_.sub(c) * x.segment(r.begin, r.size)).squaredNorm();
  }

  const L1Coder<Scalar>& l1_coder() const {
    if (!l1_) l1_.emplace(dict_.atoms, Scalar(params_.lambda1));
    return *l1_;
  }
  const RidgeCoder<Scalar>& ridge_coder() const {
    if (!ridge_) ridge_.emplace(dict_.atoms, Scalar(params_.lambda2));
    return *ridge_;
  }

  Matrix<Scalar> projection_;
  Dictionary<Scalar> dict_;
  Matrix<Scalar> means_;
  ClassifierParams params_;
  mutable std::optional<L1Coder<Scalar>> l1_;
  mutable std::optional<RidgeCoder<Scalar>> ridge_;
};

template <typename Scalar>
Classification<Scalar> classify_sample(const Vector<Scalar>& raw, const TrainedModel<Scalar>& model,
                                       const ClassifierParams& params) {
  return Classifier<Scalar>(model, params).classify_sample(raw);
}

template <typename Scalar>
Classification<Scalar> classify_frame_fast(const Vector<Scalar>& raw, const TrainedModel<Scalar>& model,
                                           const ClassifierParams& params) {
  return Classifier<Scalar>(model, params).classify_frame_fast(raw);
}

template <typename Scalar>
SetClassification<Scalar> classify_set(const Matrix<Scalar>& frames, const TrainedModel<Scalar>& model,
                                       const ClassifierParams& params) {
  return Classifier<Scalar>(model, params).classify_set(frames);
}

}  // namespace jnpdl
