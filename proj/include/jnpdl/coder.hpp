#pragma once

#include "jnpdl/graph.hpp"
#include "jnpdl/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>
#include <vector>

namespace jnpdl {

struct CoderParams {
  double alpha2 = 1.0;   ///< graph term weight
  double alpha3 = 0.05;  ///< l1 weight during training
  double lambda1 = 5e-6; ///< l1 weight at test time
  double lambda2 = 1e-3; ///< ridge weight
  double eta = 0.0;      ///< ridge weight on X that keeps the graph term bounded below
  double prox_tau = 0.1; ///< margin added to the per-column proximal weight
  Index max_iters = 100; ///< block-coordinate sweeps per update
  double tol = 1e-6;     ///< relative objective change between sweeps

  Index lasso_max_iters = 20000;
  double kkt_tol = 1e-9;

  /// >1 enables the Jacobi mode: classes are swept concurrently against a
  /// frozen snapshot of the other classes' columns.
  unsigned threads = 1;
};

/// Thrown by code_l1 when the KKT residual does not reach tolerance.
class ConvergenceError : public NumericalError {
public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last, double residual)
      : NumericalError(what), last_iterate(std::move(last)), kkt_residual(residual) {}

  Eigen::VectorXd last_iterate;
  double kkt_residual;
};

template <typename Scalar>
struct LassoResult {
  Vector<Scalar> x;
  Scalar kkt_residual = 0;
  Index iterations = 0;
  bool converged = false;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
template <typename Scalar>
Scalar largest_eigenvalue(const Matrix<Scalar>& h, Index iterations = 200) {
  if (h.rows() == 0) return 0;
  Vector<Scalar> v = Vector<Scalar>::Ones(h.rows()).normalized();
  Scalar lambda = 0;
  for (Index it = 0; it < iterations; ++it) {
    Vector<Scalar> w = h * v;
    const Scalar norm = w.norm();
    if (norm == 0) return 0;
    lambda = v.dot(w);
    v = w / norm;
  }
  return lambda;
}

/// Worst violation of the optimality conditions of
///   min 1/2 x'Hx - g'x + lambda ||x||_1
/// given the smooth gradient Hx - g.
template <typename Scalar>
Scalar l1_kkt_residual(const Vector<Scalar>& x, const Vector<Scalar>& grad, Scalar lambda) {
  Scalar worst = 0;
  for (Index k = 0; k < x.size(); ++k) {
    const Scalar r = x(k) != 0 ? std::abs(grad(k) + lambda * (x(k) > 0 ? 1 : -1))
                               : std::max(Scalar(0), std::abs(grad(k)) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

template <typename Scalar>
Scalar quadratic_l1_value(const Matrix<Scalar>& h, const Vector<Scalar>& g, Scalar lambda,
                          const Vector<Scalar>& x) {
  return Scalar(0.5) * x.dot(h * x) - g.dot(x) + lambda * x.template lpNorm<1>();
}

namespace detail {

template <typename Scalar>
Vector<Scalar> soft_threshold(const Vector<Scalar>& v, Scalar t) {
  return v.unaryExpr([t](Scalar a) { return a > t ? a - t : (a < -t ? a + t : Scalar(0)); });
}

/// Solves the sign-restricted stationarity system on the current support.
/// Returns true and overwrites x when the result keeps the signs and improves the residual.
template <typename Scalar>
bool polish_support(const Matrix<Scalar>& h, const Vector<Scalar>& g, Scalar lambda, Vector<Scalar>& x,
                    Scalar& residual) {
  std::vector<Index> support;
  for (Index k = 0; k < x.size(); ++k) {
    if (x(k) != 0) support.push_back(k);
  }
  if (support.empty()) return false;
  const auto m = static_cast<Index>(support.size());
  Matrix<Scalar> hs(m, m);
  Vector<Scalar> rhs(m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) hs(a, b) = h(support[a], support[b]);
    rhs(a) = g(support[a]) - lambda * (x(support[a]) > 0 ? 1 : -1);
  }
  Eigen::LDLT<Matrix<Scalar>> ldlt(hs);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < Scalar(1e-12)) return false;
  const Vector<Scalar> xs = ldlt.solve(rhs);
  Vector<Scalar> candidate = Vector<Scalar>::Zero(x.size());
  for (Index a = 0; a < m; ++a) {
    if ((xs(a) > 0) != (x(support[a]) > 0) || xs(a) == 0) return false;
    candidate(support[a]) = xs(a);
  }
  const Scalar r = l1_kkt_residual<Scalar>(candidate, h * candidate - g, lambda);
  if (!(r < residual) || quadratic_l1_value(h, g, lambda, candidate) > quadratic_l1_value(h, g, lambda, x)) {
    return false;
  }
  x = std::move(candidate);
  residual = r;
  return true;
}

}  // namespace detail

/// Accelerated proximal gradient (FISTA with backtracking and gradient-based
/// restart) for min 1/2 x'Hx - g'x + lambda ||x||_1 with H symmetric PSD.
///
/// `lipschitz` is the initial step constant (e.g. a power-iteration estimate
/// of ||H||); backtracking doubles it whenever the quadratic upper bound fails.
/// Every few iterations the current support is polished by an exact solve.
template <typename Scalar>
LassoResult<Scalar> solve_quadratic_l1(const Matrix<Scalar>& h, const Vector<Scalar>& g, Scalar lambda,
                                       Vector<Scalar> x0, Scalar lipschitz, Index max_iters, Scalar kkt_tol) {
  const Index n = g.size();
  LassoResult<Scalar> result;
  if (n == 0) {
    result.x = Vector<Scalar>(0);
    result.converged = true;
    return result;
  }
  Scalar step_const = std::max(lipschitz, std::numeric_limits<Scalar>::min());
  Vector<Scalar> x = std::move(x0);
  Vector<Scalar> y = x;
  Scalar t = 1;
  Scalar residual = l1_kkt_residual<Scalar>(x, h * x - g, lambda);

  Index it = 0;
  for (; it < max_iters && residual > kkt_tol; ++it) {
    const Vector<Scalar> grad_y = h * y - g;
    Vector<Scalar> x_next;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      x_next = detail::soft_threshold<Scalar>(y - grad_y / step_const, lambda / step_const);
      const Vector<Scalar> d = x_next - y;
      const Scalar dd = d.squaredNorm();
      if (dd == 0 || d.dot(h * d) <= step_const * dd * (1 + Scalar(1e-12))) break;
      step_const *= 2;
    }
    if ((y - x_next).dot(x_next - x) > 0) {
      // momentum pointed uphill: keep the step, drop the momentum
      t = 1;
      y = x_next;
    } else {
      const Scalar t_next = (1 + std::sqrt(1 + 4 * t * t)) / 2;
      y = x_next + ((t - 1) / t_next) * (x_next - x);
      t = t_next;
    }
    x = std::move(x_next);
    if (it % 5 == 4) {
      if (!x.allFinite()) throw NumericalError("lasso: non-finite iterate");
      residual = l1_kkt_residual<Scalar>(x, h * x - g, lambda);
      if (it % 25 == 24 && residual > kkt_tol && detail::polish_support(h, g, lambda, x, residual)) {
        y = x;
        t = 1;
      }
    }
  }
  residual = l1_kkt_residual<Scalar>(x, h * x - g, lambda);
  if (residual > kkt_tol) detail::polish_support(h, g, lambda, x, residual);
  result.x = std::move(x);
  result.kkt_residual = residual;
  result.iterations = it;
  result.converged = residual <= kkt_tol;
  return result;
}

/// Exact l1 path following (homotopy / LARS-lasso) for
///   min 1/2 x'Hx - g'x + lambda ||x||_1,
/// starting from x = 0 at lambda = max|g| and tracking the piecewise-linear
/// solution path down to `lambda`. If an active-set system becomes singular
/// or the step budget runs out, `complete` is false and `x` is the last exact
/// path point (the solution at penalty `level` > lambda).
template <typename Scalar>
struct HomotopyResult {
  Vector<Scalar> x;
  Scalar level = 0;
  bool complete = false;
};

template <typename Scalar>
HomotopyResult<Scalar> solve_l1_homotopy(const Matrix<Scalar>& h, const Vector<Scalar>& g, Scalar lambda,
                                         Index max_steps = 0) {
  const Index n = g.size();
  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  if (n == 0) return {x, lambda, true};
  if (max_steps == 0) max_steps = 20 * n + 100;
  Index first = 0;
  Scalar level = g.cwiseAbs().maxCoeff(&first);
  if (level <= lambda) return {x, lambda, true};

  std::vector<Index> active{first};
  std::vector<bool> in_active(static_cast<std::size_t>(n), false);
  in_active[first] = true;
  Vector<Scalar> c = g;
  for (Index step = 0; step < max_steps; ++step) {
    const auto m = static_cast<Index>(active.size());
    Matrix<Scalar> haa(m, m);
    Vector<Scalar> signs(m);
    for (Index a = 0; a < m; ++a) {
      for (Index b = 0; b < m; ++b) haa(a, b) = h(active[a], active[b]);
      signs(a) = c(active[a]) > 0 ? 1 : -1;
    }
    Eigen::LDLT<Matrix<Scalar>> ldlt(haa);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() <= 0) {
      return {x, level, false};
    }
    const Vector<Scalar> dir_a = ldlt.solve(signs);
    if (!dir_a.allFinite()) return {x, level, false};
    Vector<Scalar> dir = Vector<Scalar>::Zero(n);
    for (Index a = 0; a < m; ++a) dir(active[a]) = dir_a(a);
    const Vector<Scalar> slope = h * dir;

    Scalar gamma = level - lambda;
    Index event = -1;
    bool entering = false;
    const Scalar tiny = std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), level);
    for (Index j = 0; j < n; ++j) {
      if (in_active[j]) {
        if (dir(j) != 0) {
          const Scalar hit = -x(j) / dir(j);
          if (hit > tiny && hit < gamma) {
            gamma = hit;
            event = j;
            entering = false;
          }
        }
        continue;
      }
      for (const Scalar side : {Scalar(1), Scalar(-1)}) {
        const Scalar denom = Scalar(1) - side * slope(j);
        if (denom <= 0) continue;
        const Scalar hit = (level - side * c(j)) / denom;
        if (hit > tiny && hit < gamma) {
          gamma = hit;
          event = j;
          entering = true;
        }
      }
    }

    x += gamma * dir;
    level -= gamma;
    if (event < 0) {
      return {x, lambda, true};
    }
    if (entering) {
      active.push_back(event);
      in_active[event] = true;
    } else {
      x(event) = 0;
      active.erase(std::find(active.begin(), active.end(), event));
      in_active[event] = false;
      if (active.empty()) {
        // path restarts from the next most correlated coordinate
        c = g - h * x;
        Index j = 0;
        level = c.cwiseAbs().maxCoeff(&j);
        if (level <= lambda) return {x, lambda, true};
        active.push_back(j);
        in_active[j] = true;
        continue;
      }
    }
    c = g - h * x;
  }
  return {x, level, false};
}

/// Test-time l1 coder: argmin_x ||z - D x||^2 + lambda1 ||x||_1.
/// Solved exactly by path following, with FISTA as the fallback. The Gram
/// matrix is computed once per dictionary.
template <typename Scalar>
class L1Coder {
public:
  L1Coder(const Matrix<Scalar>& atoms, Scalar lambda1, Index max_iters = 20000, Scalar kkt_tol = Scalar(1e-6))
      : atoms_(atoms), hessian_(2 * atoms.transpose() * atoms), lambda_(lambda1), max_iters_(max_iters),
        kkt_tol_(kkt_tol) {
    require(lambda1 >= 0, "code_l1: lambda1 must be non-negative");
    require(atoms.allFinite(), "code_l1: non-finite dictionary");
    lipschitz_ = largest_eigenvalue(hessian_);
  }

  LassoResult<Scalar> solve(const Vector<Scalar>& sample) const {
    require(sample.size() == atoms_.rows(), "code_l1: sample dimension does not match dictionary");
    if (!sample.allFinite()) throw NumericalError("code_l1: non-finite sample");
    const Vector<Scalar> g = 2 * atoms_.transpose() * sample;
    auto path = solve_l1_homotopy<Scalar>(hessian_, g, lambda_);
    if (path.complete) {
      LassoResult<Scalar> exact;
      exact.kkt_residual = l1_kkt_residual<Scalar>(path.x, hessian_ * path.x - g, lambda_);
      exact.converged = exact.kkt_residual <= kkt_tol_;
      if (exact.converged) {
        exact.x = std::move(path.x);
        return exact;
      }
    }
    return solve_quadratic_l1<Scalar>(hessian_, g, lambda_, path.x, lipschitz_, max_iters_, kkt_tol_);
  }

  /// Throws ConvergenceError when the KKT tolerance is not met.
  Vector<Scalar> code(const Vector<Scalar>& sample) const {
    auto r = solve(sample);
    if (!r.converged) {
      throw ConvergenceError("code_l1: KKT residual " + std::to_string(double(r.kkt_residual)) +
                                 " above tolerance after " + std::to_string(r.iterations) + " iterations",
                             r.x.template cast<double>(), double(r.kkt_residual));
    }
    return std::move(r.x);
  }

private:
  Matrix<Scalar> atoms_;
  Matrix<Scalar> hessian_;
  Scalar lambda_;
  Scalar lipschitz_ = 0;
  Index max_iters_;
  Scalar kkt_tol_;
};

template <typename Scalar>
Vector<Scalar> code_l1(const Vector<Scalar>& sample, const Dictionary<Scalar>& dict, Scalar lambda1) {
  return L1Coder<Scalar>(dict.atoms, lambda1).code(sample);
}

/// Ridge coder x = (D'D + lambda2 I)^{-1} D' z with a cached factorization.
template <typename Scalar>
class RidgeCoder {
public:
  RidgeCoder(const Matrix<Scalar>& atoms, Scalar lambda2) : atoms_t_(atoms.transpose()) {
    require(lambda2 >= 0, "code_l2: lambda2 must be non-negative");
    Matrix<Scalar> gram = atoms_t_ * atoms;
    gram.diagonal().array() += lambda2;
    ldlt_.compute(gram);
    if (ldlt_.info() != Eigen::Success || !ldlt_.isPositive() ||
        (atoms.cols() > 0 && ldlt_.rcond() < std::numeric_limits<Scalar>::epsilon() * 16)) {
      throw NumericalError("code_l2: singular system D'D + lambda2 I (lambda2 = " + std::to_string(double(lambda2)) +
                           ")");
    }
  }

  template <typename Derived>
  Matrix<Scalar> code(const Eigen::MatrixBase<Derived>& samples) const {
    require(samples.rows() == atoms_t_.cols(), "code_l2: sample dimension does not match dictionary");
    return ldlt_.solve(atoms_t_ * samples);
  }

private:
  Matrix<Scalar> atoms_t_;
  Eigen::LDLT<Matrix<Scalar>> ldlt_;
};

template <typename Scalar>
Vector<Scalar> code_l2(const Vector<Scalar>& sample, const Dictionary<Scalar>& dict, Scalar lambda2) {
  return RidgeCoder<Scalar>(dict.atoms, lambda2).code(sample);
}

/// Per-class mean coefficient vectors, one column per class (A x K).
template <typename Scalar>
Matrix<Scalar> class_means(const CodingMatrix<Scalar>& coding) {
  Matrix<Scalar> means(coding.coeffs.rows(), coding.num_classes());
  for (Index c = 0; c < coding.num_classes(); ++c) {
    const auto& r = coding.sample_ranges[c];
    require(r.size > 0, "class_means: class " + std::to_string(c + 1) + " has no columns");
    means.col(c) = coding.coeffs.middleCols(r.begin, r.size).rowwise().sum() / Scalar(r.size);
  }
  return means;
}

/// Weighted graph-based coefficient term alpha2 (Tr(X Lc X') - Tr(X Lp X')) + eta ||X||_F^2.
template <typename Scalar>
Scalar coefficient_graph_term(const Matrix<Scalar>& x, const LaplacianPair<Scalar>& graphs, double alpha2,
                              double eta) {
  const Scalar graph = laplacian_trace(x, graphs.intrinsic) - laplacian_trace(x, graphs.penalty);
  return Scalar(alpha2) * graph + Scalar(eta) * x.squaredNorm();
}

/// Smallest ridge weight eta that makes alpha2 (Lc - Lp) + eta I positive semi-definite.
/// Below it the coefficient objective is unbounded below.
template <typename Scalar>
Scalar minimal_coefficient_ridge(const LaplacianPair<Scalar>& graphs, double alpha2) {
  if (alpha2 == 0 || graphs.intrinsic.rows() == 0) return 0;
  const Matrix<Scalar> diff = graphs.intrinsic - graphs.penalty;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(diff, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("coefficient ridge: eigen-decomposition failed");
  return Scalar(alpha2) * std::max(Scalar(0), -eig.eigenvalues().minCoeff());
}

/// Training-time coefficient objective with P, M and D fixed:
///   R(X) + alpha2 (Tr(X Lc X') - Tr(X Lp X')) + eta ||X||_F^2 + alpha3 ||X||_1.
template <typename Scalar>
Scalar coefficient_objective(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                             const LaplacianPair<Scalar>& graphs, const CodingMatrix<Scalar>& coding,
                             double alpha2, double alpha3, double eta = 0.0) {
  return reconstruction_terms(projected, dict, coding).total() +
         coefficient_graph_term(coding.coeffs, graphs, alpha2, eta) +
         Scalar(alpha3) * coding.coeffs.template lpNorm<1>();
}

/// Gradient of the smooth part (everything except alpha3 ||X||_1) of coefficient_objective.
template <typename Scalar>
Matrix<Scalar> coefficient_gradient(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                                    const LaplacianPair<Scalar>& graphs, const CodingMatrix<Scalar>& coding,
                                    double alpha2, double eta = 0.0) {
  check_coding_layout(projected, dict, coding);
  const Matrix<Scalar>& x = coding.coeffs;
  Matrix<Scalar> grad = 2 * dict.atoms.transpose() * (dict.atoms * x - projected);
  for (Index i = 0; i < coding.num_classes(); ++i) {
    const auto& cols = coding.sample_ranges[i];
    for (Index j = 0; j < coding.num_classes(); ++j) {
      const auto& rows = coding.atom_ranges[j];
      Matrix<Scalar> residual = dict.sub(j) * coding.block(i, j);
      if (i == j) residual -= projected.middleCols(cols.begin, cols.size);
      grad.block(rows.begin, cols.begin, rows.size, cols.size) += 2 * dict.sub(j).transpose() * residual;
    }
  }
  grad += Scalar(2 * alpha2) * x * (graphs.intrinsic - graphs.penalty) + Scalar(2 * eta) * x;
  return grad;
}

template <typename Scalar>
struct CoefficientUpdate {
  CodingMatrix<Scalar> coding;
  Scalar objective_before = 0;
  Scalar objective_after = 0;
  Index sweeps = 0;
  bool converged = false;        ///< false: max_iters reached, best iterate returned
  bool jacobi_fallbacks = false; ///< a parallel sweep increased the objective and was redone sequentially
};

namespace detail {

/// Shared per-update state of the column-wise block coordinate descent.
template <typename Scalar>
struct ColumnSweeper {
  const Matrix<Scalar>& projected;
  const Dictionary<Scalar>& dict;
  const CodingMatrix<Scalar>& layout;
  const CoderParams& params;
  Matrix<Scalar> graph_diff;  // Lc - Lp
  Matrix<Scalar> hessian_base;  // 2 (G + blockdiag(G))
  Matrix<Scalar> dt_z;          // D' Z
  Scalar lipschitz_base = 0;

  ColumnSweeper(const Matrix<Scalar>& z, const Dictionary<Scalar>& d, const LaplacianPair<Scalar>& graphs,
                const CodingMatrix<Scalar>& current, const CoderParams& p)
      : projected(z), dict(d), layout(current), params(p) {
    graph_diff = graphs.intrinsic - graphs.penalty;
    const Matrix<Scalar> gram = d.atoms.transpose() * d.atoms;
    hessian_base = gram;
    for (const auto& r : d.class_ranges) {
      hessian_base.block(r.begin, r.begin, r.size, r.size) += gram.block(r.begin, r.begin, r.size, r.size);
    }
    hessian_base *= 2;
    dt_z = d.atoms.transpose() * z;
    lipschitz_base = largest_eigenvalue(hessian_base);
  }

  /// Updates column n of x in place (proximally safeguarded exact block step).
  void update_column(Matrix<Scalar>& x, Index n, Index cls) const {
    const Scalar alpha2 = Scalar(params.alpha2);
    const Scalar diag = alpha2 * graph_diff(n, n) + Scalar(params.eta);
    const Scalar tau = std::max(Scalar(0), -diag) + Scalar(params.prox_tau);
    const Scalar shift = 2 * (diag + tau);

    Vector<Scalar> b = dt_z.col(n);
    const auto& own = layout.atom_ranges[cls];
    b.segment(own.begin, own.size) += dt_z.col(n).segment(own.begin, own.size);
    if (alpha2 != 0) {
      b -= alpha2 * (x * graph_diff.col(n) - graph_diff(n, n) * x.col(n));
    }
    const Vector<Scalar> x_old = x.col(n);
    const Vector<Scalar> g = 2 * (b + tau * x_old);
    Matrix<Scalar> h = hessian_base;
    h.diagonal().array() += shift;

    const Scalar lambda = Scalar(params.alpha3);
    auto r = solve_quadratic_l1<Scalar>(h, g, lambda, x_old, lipschitz_base + shift, params.lasso_max_iters,
                                        Scalar(params.kkt_tol));
    if (!r.x.allFinite()) throw NumericalError("update_training_coeffs: non-finite column iterate");
    if (quadratic_l1_value(h, g, lambda, r.x) <= quadratic_l1_value(h, g, lambda, x_old)) {
      x.col(n) = r.x;
    }
  }

  void sequential_sweep(Matrix<Scalar>& x) const {
    for (Index c = 0; c < layout.num_classes(); ++c) {
      const auto& cols = layout.sample_ranges[c];
      for (Index n = cols.begin; n < cols.end(); ++n) update_column(x, n, c);
    }
  }

  void jacobi_sweep(Matrix<Scalar>& x, unsigned threads) const {
    const Matrix<Scalar> snapshot = x;
    const Index k = layout.num_classes();
    std::vector<Matrix<Scalar>> work(static_cast<std::size_t>(k));
    auto run = [&](Index first, Index last) {
      for (Index c = first; c < last; ++c) {
        Matrix<Scalar> local = snapshot;
        const auto& cols = layout.sample_ranges[c];
        for (Index n = cols.begin; n < cols.end(); ++n) update_column(local, n, c);
        work[c] = local.middleCols(cols.begin, cols.size);
      }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(k)));
    std::vector<std::thread> pool;
    const Index chunk = (k + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const Index first = std::min<Index>(k, w * chunk);
      pool.emplace_back(run, first, std::min<Index>(k, first + chunk));
    }
    for (auto& t : pool) t.join();
    for (Index c = 0; c < k; ++c) {
      const auto& cols = layout.sample_ranges[c];
      x.middleCols(cols.begin, cols.size) = work[c];
    }
  }
};

}  // namespace detail

/// Block-coordinate update of the training coefficients with P, M and D fixed.
///
/// Columns are visited class by class in ascending index order. Each column
/// solves its convex l1 subproblem with a proximal term
/// tau ||x - x_old||^2, tau = max(0, alpha2 (Lp_nn - Lc_nn) - eta) + prox_tau, which
/// keeps the subproblem convex under the penalty graph and makes every
/// accepted column step non-increasing in the objective.
template <typename Scalar>
CoefficientUpdate<Scalar> update_training_coeffs(const Matrix<Scalar>& projected, const Dictionary<Scalar>& dict,
                                                 const LaplacianPair<Scalar>& graphs,
                                                 const CodingMatrix<Scalar>& current, const CoderParams& params) {
  check_coding_layout(projected, dict, current);
  const Index n = projected.cols();
  require(graphs.intrinsic.rows() == n && graphs.intrinsic.cols() == n && graphs.penalty.rows() == n &&
              graphs.penalty.cols() == n,
          "update_training_coeffs: graphs are not built over the training columns");
  require(params.alpha2 >= 0 && params.alpha3 >= 0 && params.eta >= 0 && params.tol > 0 && params.max_iters >= 1,
          "update_training_coeffs: invalid parameters");
  if (!projected.allFinite() || !current.coeffs.allFinite()) {
    throw NumericalError("update_training_coeffs: non-finite input");
  }

  const detail::ColumnSweeper<Scalar> sweeper(projected, dict, graphs, current, params);
  auto objective = [&](const Matrix<Scalar>& x) {
    CodingMatrix<Scalar> c{x, current.sample_ranges, current.atom_ranges};
    return coefficient_objective(projected, dict, graphs, c, params.alpha2, params.alpha3, params.eta);
  };

  CoefficientUpdate<Scalar> out;
  Matrix<Scalar> x = current.coeffs;
  out.objective_before = objective(x);
  Scalar previous = out.objective_before;
  for (Index sweep = 0; sweep < params.max_iters; ++sweep) {
    if (params.threads > 1 && current.num_classes() > 1) {
      Matrix<Scalar> trial = x;
      sweeper.jacobi_sweep(trial, params.threads);
      if (objective(trial) <= previous) {
        x = std::move(trial);
      } else {
        out.jacobi_fallbacks = true;
        sweeper.sequential_sweep(x);
      }
    } else {
      sweeper.sequential_sweep(x);
    }
    ++out.sweeps;
    const Scalar value = objective(x);
    if (!std::isfinite(double(value))) throw NumericalError("update_training_coeffs: non-finite objective");
    const Scalar change = std::abs(previous - value);
    previous = value;
    if (change <= Scalar(params.tol) * std::max(std::abs(value), std::numeric_limits<Scalar>::min())) {
      out.converged = true;
      break;
    }
  }
  out.objective_after = previous;
  out.coding = CodingMatrix<Scalar>{std::move(x), current.sample_ranges, current.atom_ranges};
  return out;
}

}  // namespace jnpdl
