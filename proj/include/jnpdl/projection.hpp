#pragma once

#include "jnpdl/graph.hpp"
#include "jnpdl/model.hpp"

#include <cmath>

namespace jnpdl {

struct ProjectionParams {
  double alpha1 = 1.0;
  double beta = 0.7;
  double epsilon_div = 1e-12;
  Index max_iters = 10;  ///< (P, M) alternations per fit_projection call
  double tol = 1e-6;
  int max_halvings = 8;  ///< step exponent goes down to 2^-max_halvings before giving up
};

template <typename Scalar>
Matrix<Scalar> project(const ProjectionModel<Scalar>& model, const Matrix<Scalar>& samples) {
  require(samples.rows() == model.input_dim(),
          "project: samples have dimension " + std::to_string(samples.rows()) + ", projection expects " +
              std::to_string(model.input_dim()));
  return model.P * samples;
}

/// Unweighted parts of the projection objective.
template <typename Scalar>
struct ProjectionTerms {
  Scalar reconstruction = 0;  ///< ||PY - DX||^2 + sum_i ||PY_i - D_i X_i^i||^2
  Scalar self_representation = 0;  ///< ||Y - MPY||^2
  Scalar embedding_graph = 0;      ///< Tr(P^ Y Lp Y' P^')
  Scalar complement_graph = 0;     ///< Tr(P~ Y Lpp Y' P~')
  Scalar coupling = 0;             ///< ||M - P'||^2

  /// G_p with the given beta (not multiplied by alpha1).
  Scalar graph_projection_term(Scalar beta) const {
    return self_representation + beta * embedding_graph + beta * complement_graph + coupling;
  }
  Scalar total(Scalar alpha1, Scalar beta) const { return reconstruction + alpha1 * graph_projection_term(beta); }
};

/// Quantities of the P/M subproblem that stay fixed while D and X are fixed.
template <typename Scalar>
struct ProjectionProblem {
  const Matrix<Scalar>& samples;
  Matrix<Scalar> dx;   ///< D X
  Matrix<Scalar> own;  ///< own-class reconstruction, column n = D_c x_n restricted to class c
  Matrix<Scalar> scatter_pos, scatter_neg;  ///< (Y Y')^+, (Y Y')^-
  Matrix<Scalar> target_pos, target_neg;    ///< ((DX + own) Y')^+ and ^-
  Matrix<Scalar> embed_pos, embed_neg;      ///< split of Y (B - W) Y' for the intrinsic graph
  Matrix<Scalar> comp_pos, comp_neg;        ///< same for the penalty graph
  Matrix<Scalar> embed_quad, comp_quad;     ///< Y Lp Y', Y Lpp Y'
  Scalar alpha1, beta, eps;

  ProjectionProblem(const Matrix<Scalar>& y, const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding,
                    const GraphPair<Scalar>& graphs, const ProjectionParams& params)
      : samples(y), alpha1(Scalar(params.alpha1)), beta(Scalar(params.beta)), eps(Scalar(params.epsilon_div)) {
    require(params.alpha1 >= 0 && params.beta >= 0 && params.epsilon_div > 0,
            "projection: alpha1, beta must be non-negative and epsilon_div positive");
    require(coding.coeffs.cols() == y.cols() && graphs.intrinsic.size() == y.cols() &&
                graphs.penalty.size() == y.cols(),
            "projection: samples, coefficients and graphs disagree on N");
    dx = dict.atoms * coding.coeffs;
    own = own_class_reconstruction(dict, coding);
    const Matrix<Scalar> scatter = y * y.transpose();
    scatter_pos = positive_part(scatter);
    scatter_neg = negative_part(scatter);
    const Matrix<Scalar> target = (dx + own) * y.transpose();
    target_pos = positive_part(target);
    target_neg = negative_part(target);
    split_graph(graphs.intrinsic, embed_pos, embed_neg, embed_quad);
    split_graph(graphs.penalty, comp_pos, comp_neg, comp_quad);
  }

  ProjectionTerms<Scalar> terms(const Matrix<Scalar>& p, const Matrix<Scalar>& m, Index q) const {
    ProjectionTerms<Scalar> t;
    const Matrix<Scalar> z = p * samples;
    t.reconstruction = (z - dx).squaredNorm() + (z - own).squaredNorm();
    t.self_representation = (samples - m * z).squaredNorm();
    const auto top = p.topRows(q);
    const auto bottom = p.bottomRows(p.rows() - q);
    t.embedding_graph = (top * embed_quad).cwiseProduct(top).sum();
    t.complement_graph = (bottom * comp_quad).cwiseProduct(bottom).sum();
    t.coupling = (m - p.transpose()).squaredNorm();
    return t;
  }

  Scalar objective(const Matrix<Scalar>& p, const Matrix<Scalar>& m, Index q) const {
    return terms(p, m, q).total(alpha1, beta);
  }

  /// Non-negative split of half the P-gradient: grad_P = 2 (pos - neg).
  std::pair<Matrix<Scalar>, Matrix<Scalar>> p_gradient_parts(const Matrix<Scalar>& p, const Matrix<Scalar>& m,
                                                             Index q) const {
    const Matrix<Scalar> mtm = m.transpose() * m;
    Matrix<Scalar> pos = 2 * p * scatter_pos + target_neg + alpha1 * (mtm * p * scatter_pos + m.transpose() * scatter_neg) +
                         alpha1 * p;
    Matrix<Scalar> neg = 2 * p * scatter_neg + target_pos + alpha1 * (mtm * p * scatter_neg + m.transpose() * scatter_pos) +
                         alpha1 * m.transpose();
    const Index rest = p.rows() - q;
    const Scalar w = alpha1 * beta;
    pos.topRows(q) += w * p.topRows(q) * embed_pos;
    neg.topRows(q) += w * p.topRows(q) * embed_neg;
    pos.bottomRows(rest) += w * p.bottomRows(rest) * comp_pos;
    neg.bottomRows(rest) += w * p.bottomRows(rest) * comp_neg;
    return {std::move(pos), std::move(neg)};
  }

  /// Non-negative split of half the M-gradient: grad_M = 2 (pos - neg).
  std::pair<Matrix<Scalar>, Matrix<Scalar>> m_gradient_parts(const Matrix<Scalar>& p, const Matrix<Scalar>& m) const {
    const Matrix<Scalar> pt = p.transpose();
    Matrix<Scalar> pos = alpha1 * (m * (p * scatter_pos * pt) + scatter_neg * pt + m);
    Matrix<Scalar> neg = alpha1 * (m * (p * scatter_neg * pt) + scatter_pos * pt + pt);
    return {std::move(pos), std::move(neg)};
  }

private:
  void split_graph(const DiscriminativeGraph<Scalar>& g, Matrix<Scalar>& pos, Matrix<Scalar>& neg,
                   Matrix<Scalar>& quad) const {
    const Matrix<Scalar> yd = samples * g.degree * samples.transpose();
    const Matrix<Scalar> yw = samples * g.similarity * samples.transpose();
    pos = positive_part(yd) + negative_part(yw);
    neg = negative_part(yd) + positive_part(yw);
    quad = samples * g.laplacian * samples.transpose();
  }
};

template <typename Scalar>
ProjectionTerms<Scalar> projection_terms(const ProjectionModel<Scalar>& model, const Matrix<Scalar>& samples,
                                         const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding,
                                         const GraphPair<Scalar>& graphs, const ProjectionParams& params) {
  require(samples.rows() == model.input_dim() && dict.dim() == model.output_dim(),
          "projection: shape mismatch between samples, projection and dictionary");
  check_coding_layout(Matrix<Scalar>(model.P * samples), dict, coding);
  return ProjectionProblem<Scalar>(samples, dict, coding, graphs, params).terms(model.P, model.M, model.q);
}

/// ||PY - DX||^2 + sum_i ||PY_i - D_i X_i^i||^2 + alpha1 G_p(P, M).
template <typename Scalar>
Scalar projection_objective(const ProjectionModel<Scalar>& model, const Matrix<Scalar>& samples,
                            const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding,
                            const GraphPair<Scalar>& graphs, const ProjectionParams& params) {
  return projection_terms(model, samples, dict, coding, graphs, params)
      .total(Scalar(params.alpha1), Scalar(params.beta));
}

template <typename Scalar>
struct ProjectionUpdate {
  ProjectionModel<Scalar> model;
  Scalar objective_before = 0;
  Scalar objective_after_p = 0;
  Scalar objective_pre_renormalization = 0;
  Scalar objective_after = 0;
  int p_halvings = 0;  ///< -1 when no P step was accepted
  int m_halvings = 0;  ///< -1 when no M step was accepted
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> multiplicative_candidate(const Matrix<Scalar>& current, const Matrix<Scalar>& ratio, int halvings) {
  if (halvings == 0) return current.cwiseProduct(ratio);
  const Scalar exponent = std::ldexp(Scalar(1), -halvings);
  return current.cwiseProduct(ratio.array().pow(exponent).matrix());
}

}  // namespace detail

/// One multiplicative (P, M) step followed by column renormalization of M.
///
/// P <- P .* (grad- + eps) ./ (grad+ + eps), retried with exponents 1/2, 1/4, ...
/// until the objective does not increase. The M step is accepted only if it
/// does not increase the objective either before or after renormalization,
/// so every returned model has unit-norm M columns and a non-increased objective.
template <typename Scalar>
ProjectionUpdate<Scalar> projection_step(const ProjectionProblem<Scalar>& problem, const ProjectionModel<Scalar>& model,
                                         int max_halvings) {
  ProjectionUpdate<Scalar> out;
  out.model = model;
  Matrix<Scalar>& p = out.model.P;
  Matrix<Scalar>& m = out.model.M;
  const Index q = model.q;
  const Scalar eps = problem.eps;

  out.objective_before = problem.objective(p, m, q);
  Scalar current = out.objective_before;

  {
    auto [pos, neg] = problem.p_gradient_parts(p, m, q);
    if (!pos.allFinite() || !neg.allFinite()) throw NumericalError("update_projection: non-finite P gradient");
    const Matrix<Scalar> ratio = (neg.array() + eps) / (pos.array() + eps);
    out.p_halvings = -1;
    for (int r = 0; r <= max_halvings; ++r) {
      Matrix<Scalar> candidate = detail::multiplicative_candidate(p, ratio, r);
      const Scalar value = problem.objective(candidate, m, q);
      if (std::isfinite(double(value)) && value <= current) {
        p = std::move(candidate);
        current = value;
        out.p_halvings = r;
        break;
      }
    }
  }
  out.objective_after_p = current;

  out.m_halvings = -1;
  out.objective_pre_renormalization = current;
  if (problem.alpha1 > 0) {
    auto [pos, neg] = problem.m_gradient_parts(p, m);
    if (!pos.allFinite() || !neg.allFinite()) throw NumericalError("update_projection: non-finite M gradient");
    const Matrix<Scalar> ratio = (neg.array() + eps) / (pos.array() + eps);
    for (int r = 0; r <= max_halvings; ++r) {
      Matrix<Scalar> candidate = detail::multiplicative_candidate(m, ratio, r);
      const Scalar raw_value = problem.objective(p, candidate, q);
      if (!std::isfinite(double(raw_value)) || raw_value > current) continue;
      Matrix<Scalar> normalized = candidate;
      if (normalize_columns(normalized) != 0) continue;
      const Scalar value = problem.objective(p, normalized, q);
      if (value <= current) {
        out.objective_pre_renormalization = raw_value;
        m = std::move(normalized);
        current = value;
        out.m_halvings = r;
        break;
      }
    }
  }
  out.objective_after = current;
  return out;
}

/// Single (P, M) multiplicative update with D and X fixed.
template <typename Scalar>
ProjectionUpdate<Scalar> update_projection(const ProjectionModel<Scalar>& model, const Matrix<Scalar>& samples,
                                           const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding,
                                           const GraphPair<Scalar>& graphs, const ProjectionParams& params) {
  check_projection_model(model);
  require(samples.rows() == model.input_dim() && dict.dim() == model.output_dim(),
          "update_projection: shape mismatch between samples, projection and dictionary");
  const ProjectionProblem<Scalar> problem(samples, dict, coding, graphs, params);
  return projection_step(problem, model, params.max_halvings);
}

template <typename Scalar>
struct ProjectionFit {
  ProjectionModel<Scalar> model;
  Scalar objective_before = 0;
  Scalar objective_after = 0;
  Index steps = 0;
};

/// Up to `max_iters` (P, M) alternations, stopping early on relative change below `tol`.
template <typename Scalar>
ProjectionFit<Scalar> fit_projection(const ProjectionModel<Scalar>& model, const Matrix<Scalar>& samples,
                                     const Dictionary<Scalar>& dict, const CodingMatrix<Scalar>& coding,
                                     const GraphPair<Scalar>& graphs, const ProjectionParams& params) {
  check_projection_model(model);
  require(samples.rows() == model.input_dim() && dict.dim() == model.output_dim(),
          "fit_projection: shape mismatch between samples, projection and dictionary");
  const ProjectionProblem<Scalar> problem(samples, dict, coding, graphs, params);
  ProjectionFit<Scalar> fit;
  fit.model = model;
  fit.objective_before = problem.objective(model.P, model.M, model.q);
  fit.objective_after = fit.objective_before;
  for (Index it = 0; it < params.max_iters; ++it) {
    auto step = projection_step(problem, fit.model, params.max_halvings);
    fit.model = std::move(step.model);
    ++fit.steps;
    const Scalar change = step.objective_before - step.objective_after;
    fit.objective_after = step.objective_after;
    if (change <= Scalar(params.tol) * std::max(std::abs(step.objective_after), std::numeric_limits<Scalar>::min())) break;
  }
  return fit;
}

}  // namespace jnpdl
