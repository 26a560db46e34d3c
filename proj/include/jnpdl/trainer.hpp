#pragma once

#include "jnpdl/coder.hpp"
#include "jnpdl/dataset.hpp"
#include "jnpdl/dictionary.hpp"
#include "jnpdl/graph.hpp"
#include "jnpdl/projection.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jnpdl {

/// Training hyperparameters. Zero / empty / unset fields resolve to
/// data-dependent defaults in resolve_hyperparams.
struct Hyperparams {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 0.05;
  double beta = 0.7;
  double lambda1 = 5e-6;
  std::optional<double> lambda2;  ///< default 0.001 * N / 700
  double sigma = 0.05;
  /// Ridge weight on X added to the coefficient graph term. Unset: the
  /// smallest value keeping that term bounded below, alpha2 * max(0, -lambda_min(Lc - Lp)).
  std::optional<double> eta;
  Index k1 = 5;                    ///< capped per class at n_c - 1
  Index k2 = 30;                   ///< per-sample inter-class neighbors, coefficient graph
  Index k_projection_penalty = 20; ///< shortest inter-class pairs per class, projection graph
  Index s_p = 0;                   ///< 0: same as the input dimension
  Index q = 0;                     ///< 0: s_p / 2
  Index T = 30;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  std::vector<Index> atoms_per_class;  ///< empty: max(1, n_c / 2) per class

  Index preliminary_iters = 3;  ///< outer iterations without the coefficient graph term
  Index projection_steps = 10;  ///< (P, M) alternations per outer iteration
  Index coder_sweeps = 100;
  double coder_tol = 1e-6;
  bool learn_projection = true;  ///< false keeps P and M at their initial values
  unsigned threads = 1;
};

template <typename Scalar>
Hyperparams resolve_hyperparams(Hyperparams h, const LabeledDataset<Scalar>& data) {
  require(data.num_classes >= 2, "train: at least two classes are required");
  if (!h.lambda2) h.lambda2 = 0.001 * double(data.size()) / 700.0;
  if (h.s_p == 0) h.s_p = data.dim();
  if (h.q == 0) h.q = h.s_p / 2;
  if (h.atoms_per_class.empty()) {
    for (Index c = 0; c < data.num_classes; ++c) h.atoms_per_class.push_back(std::max<Index>(1, data.class_size(c) / 2));
  }
  require(h.alpha1 >= 0 && h.alpha2 >= 0 && h.alpha3 >= 0 && h.beta >= 0, "hyperparams: weights must be non-negative");
  require(h.lambda1 >= 0 && *h.lambda2 >= 0 && h.sigma >= 0, "hyperparams: lambda1, lambda2, sigma must be non-negative");
  require(h.k1 >= 1 && h.k2 >= 1 && h.k_projection_penalty >= 1, "hyperparams: neighbor counts must be positive");
  require(h.s_p >= 2, "hyperparams: s_p must be at least 2");
  require(h.q >= 1 && h.q < h.s_p, "hyperparams: q must satisfy 1 <= q < s_p");
  require(h.T >= 1, "hyperparams: T must be at least 1");
  require(h.tol > 0 && h.coder_tol > 0, "hyperparams: tolerances must be positive");
  require(static_cast<Index>(h.atoms_per_class.size()) == data.num_classes,
          "hyperparams: atoms_per_class needs one entry per class");
  for (Index a : h.atoms_per_class) require(a >= 1, "hyperparams: every class needs at least one atom");
  return h;
}

inline ProjectionParams projection_params(const Hyperparams& h) {
  ProjectionParams p;
  p.alpha1 = h.alpha1;
  p.beta = h.beta;
  p.max_iters = h.projection_steps;
  return p;
}

inline CoderParams coder_params(const Hyperparams& h) {
  CoderParams p;
  p.alpha2 = h.alpha2;
  p.alpha3 = h.alpha3;
  p.eta = h.eta.value_or(0.0);
  p.lambda1 = h.lambda1;
  p.lambda2 = h.lambda2.value_or(0.0);
  p.max_iters = h.coder_sweeps;
  p.tol = h.coder_tol;
  p.threads = h.threads;
  return p;
}

/// Weighted objective terms; `total` is their sum.
template <typename Scalar>
struct ObjectiveTerms {
  Scalar R = 0;   ///< discriminative reconstruction error
  Scalar Gp = 0;  ///< alpha1 * graph-based projection term
  Scalar Gc = 0;  ///< alpha2 * graph-based coefficient term + eta ||X||^2
  Scalar l1 = 0;  ///< alpha3 * ||X||_1
  Scalar total = 0;
};

/// Everything the alternation works on.
template <typename Scalar>
struct TrainingState {
  Hyperparams hyper;             ///< fully resolved, including eta
  LabeledDataset<Scalar> data;  ///< grouped by class
  ProjectionModel<Scalar> projection;
  Dictionary<Scalar> dictionary;
  CodingMatrix<Scalar> coding;
  GraphPair<Scalar> projection_graphs;
  GraphPair<Scalar> coefficient_graphs;
};

template <typename Scalar>
ObjectiveTerms<Scalar> eval_objective(const ProjectionModel<Scalar>& projection, const Dictionary<Scalar>& dict,
                                      const CodingMatrix<Scalar>& coding, const Matrix<Scalar>& samples,
                                      const GraphPair<Scalar>& projection_graphs,
                                      const LaplacianPair<Scalar>& coefficient_graphs, const Hyperparams& h) {
  require(samples.rows() == projection.input_dim(), "eval_objective: sample dimension mismatch");
  const Matrix<Scalar> z = projection.P * samples;
  ObjectiveTerms<Scalar> t;
  t.R = reconstruction_terms(z, dict, coding).total();

  const Matrix<Scalar>& m = projection.M;
  const auto top = projection.embedding();
  const auto bottom = projection.complement();
  const Scalar embed = laplacian_trace(Matrix<Scalar>(top * samples), projection_graphs.intrinsic.laplacian);
  const Scalar comp = laplacian_trace(Matrix<Scalar>(bottom * samples), projection_graphs.penalty.laplacian);
  const Scalar gp = (samples - m * z).squaredNorm() + Scalar(h.beta) * embed + Scalar(h.beta) * comp +
                    (m - projection.P.transpose()).squaredNorm();
  t.Gp = Scalar(h.alpha1) * gp;

  t.Gc = coefficient_graph_term(coding.coeffs, coefficient_graphs, h.alpha2, h.eta.value_or(0.0));
  t.l1 = Scalar(h.alpha3) * coding.coeffs.template lpNorm<1>();
  t.total = t.R + t.Gp + t.Gc + t.l1;
  return t;
}

template <typename Scalar>
ObjectiveTerms<Scalar> eval_objective(const TrainingState<Scalar>& s) {
  return eval_objective(s.projection, s.dictionary, s.coding, s.data.features, s.projection_graphs,
                        s.coefficient_graphs.laplacians(), s.hyper);
}

namespace detail {

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
}

/// Ridge coding of every column of `projected`, laid out by class.
template <typename Scalar>
CodingMatrix<Scalar> ridge_coding(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                                  const std::vector<ClassRange>& sample_ranges, double lambda2) {
  const RidgeCoder<Scalar> ridge(dict.atoms, Scalar(lambda2));
  return {ridge.code(projected), sample_ranges, dict.class_ranges};
}

/// One P/M -> X -> D sweep.
template <typename Scalar>
void alternate_once(TrainingState<Scalar>& s, const Hyperparams& h, const LaplacianPair<Scalar>& coefficient_graphs,
                    double alpha2, double eta) {
  if (h.learn_projection) {
    s.projection = fit_projection(s.projection, s.data.features, s.dictionary, s.coding, s.projection_graphs,
                                  projection_params(h))
                       .model;
  }
  const Matrix<Scalar> z = s.projection.P * s.data.features;
  CoderParams cp = coder_params(h);
  cp.alpha2 = alpha2;
  cp.eta = eta;
  s.coding = update_training_coeffs(z, s.dictionary, coefficient_graphs, s.coding, cp).coding;
  s.dictionary = update_dictionary(s.dictionary, z, s.coding).dictionary;
}

}  // namespace detail

/// Builds the starting point of the alternation.
///
/// D0 and M0 are seeded uniform non-negative with unit columns, P0 = M0', and
/// X0 is the ridge coding of the projected samples P0 y_i. Projection graphs
/// use the correlation metric on raw features. Coefficient graphs come from a
/// short preliminary run without the coefficient graph term, measured with
/// Euclidean distances between the resulting coefficients.
template <typename Scalar>
TrainingState<Scalar> initialize(const LabeledDataset<Scalar>& dataset, const Hyperparams& hyper) {
  Hyperparams h = resolve_hyperparams(hyper, dataset);
  TrainingState<Scalar> s;
  s.data = is_grouped(dataset) ? dataset : group_by_class(dataset);
  const auto sample_ranges = class_ranges(s.data);

  s.dictionary = init_dictionary<Scalar>(h.s_p, h.atoms_per_class, h.seed);
  s.projection.M = random_unit_columns<Scalar>(s.data.dim(), h.s_p, detail::derived_seed(h.seed, 1));
  s.projection.P = s.projection.M.transpose();
  s.projection.q = h.q;
  s.coding = detail::ridge_coding(Matrix<Scalar>(s.projection.P * s.data.features), s.dictionary, sample_ranges,
                                  *h.lambda2);

  GraphParams proj;
  proj.k_intrinsic = h.k1;
  proj.k_penalty = h.k_projection_penalty;
  proj.metric = Metric::correlation;
  proj.penalty_selection = PenaltySelection::per_class_pairs;
  proj.threads = h.threads;
  s.projection_graphs = {build_intrinsic_graph(s.data.features, s.data.labels, proj),
                         build_penalty_graph(s.data.features, s.data.labels, proj)};

  TrainingState<Scalar> pre = s;
  const auto no_graph = LaplacianPair<Scalar>::none(s.data.size());
  for (Index it = 0; it < h.preliminary_iters; ++it) detail::alternate_once(pre, h, no_graph, 0.0, 0.0);

  GraphParams coef;
  coef.k_intrinsic = h.k1;
  coef.k_penalty = h.k2;
  coef.metric = Metric::euclidean;
  coef.penalty_selection = PenaltySelection::per_sample;
  coef.threads = h.threads;
  s.coefficient_graphs = {build_intrinsic_graph(pre.coding.coeffs, s.data.labels, coef),
                          build_penalty_graph(pre.coding.coeffs, s.data.labels, coef)};
  if (!h.eta) h.eta = double(minimal_coefficient_ridge(s.coefficient_graphs.laplacians(), h.alpha2));
  require(*h.eta >= 0, "hyperparams: eta must be non-negative");
  s.hyper = std::move(h);
  return s;
}

template <typename Scalar>
struct TrainedModel {
  ProjectionModel<Scalar> projection;
  Dictionary<Scalar> dictionary;
  CodingMatrix<Scalar> coding;
  Matrix<Scalar> class_means;  ///< A x K, frozen at the end of training
  std::vector<ObjectiveTerms<Scalar>> objective_trace;
  Hyperparams hyperparams;
  /// (iteration, relative increase) for every outer step whose total went up by more than 1e-8 relative.
  std::vector<std::pair<Index, Scalar>> monotonicity_violations;
  bool converged = false;

  Index num_classes() const { return dictionary.num_classes(); }
};

/// Alternates P/M, X and D updates until the relative change of the total
/// objective falls below tol or T outer iterations have run.
template <typename Scalar>
TrainedModel<Scalar> train(const LabeledDataset<Scalar>& dataset, const Hyperparams& hyper) {
  TrainingState<Scalar> s = initialize(dataset, hyper);
  const Hyperparams& h = s.hyper;
  const auto graphs = s.coefficient_graphs.laplacians();

  TrainedModel<Scalar> out;
  out.hyperparams = h;
  out.objective_trace.push_back(eval_objective(s));
  for (Index t = 1; t <= h.T; ++t) {
    try {
      detail::alternate_once(s, h, graphs, h.alpha2, *h.eta);
    } catch (const NumericalError& e) {
      throw NumericalError("train: outer iteration " + std::to_string(t) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("train: outer iteration " + std::to_string(t) + ": " + e.what());
    }
    const auto terms = eval_objective(s);
    if (!std::isfinite(double(terms.total))) {
      throw NumericalError("train: non-finite objective at outer iteration " + std::to_string(t));
    }
    const Scalar previous = out.objective_trace.back().total;
    out.objective_trace.push_back(terms);
    const Scalar scale = std::max(std::abs(previous), std::numeric_limits<Scalar>::min());
    if (terms.total - previous > Scalar(1e-8) * scale) {
      out.monotonicity_violations.emplace_back(t, (terms.total - previous) / scale);
    }
    if (std::abs(previous - terms.total) < Scalar(h.tol) * scale) {
      out.converged = true;
      break;
    }
  }
  out.projection = std::move(s.projection);
  out.dictionary = std::move(s.dictionary);
  out.coding = std::move(s.coding);
  out.class_means = class_means(out.coding);
  return out;
}

}  // namespace jnpdl
