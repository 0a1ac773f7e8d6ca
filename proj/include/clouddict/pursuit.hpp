#ifndef CLOUDDICT_PURSUIT_HPP
#define CLOUDDICT_PURSUIT_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clouddict/basis.hpp"
#include "clouddict/errors.hpp"
#include "clouddict/geometry.hpp"
#include "clouddict/sparse_code.hpp"

namespace clouddict {

struct PursuitParams {
  int sparsity_L = 4;         // OMP atom budget
  double residual_tol = 0.0;  // OMP early stop on ||r||_2
  double lambda = 0.1;        // l1 weight for the relaxed solver
  int max_iters = 1000;       // proximal-gradient iteration cap

  void validate() const {
    if (sparsity_L < 0) throw InvalidArgument("sparsity_L must be >= 0");
    if (!(residual_tol >= 0.0)) throw InvalidArgument("residual_tol must be >= 0");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  }
};

enum class Solver { omp, relaxed };

template <typename Scalar>
struct OmpTrace {
  std::vector<Eigen::Index> selected;  // in selection order
  std::vector<Scalar> residual_norms;  // ||y|| followed by one entry per selection
};

namespace detail {

template <typename DerivedY, typename DerivedD>
void check_design(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedD>& design) {
  if (y.cols() != 1) throw DimensionMismatch("signal must be a column vector");
  if (y.rows() != design.rows())
    throw DimensionMismatch("signal has " + std::to_string(y.rows()) + " samples, design matrix has " +
                            std::to_string(design.rows()) + " rows");
}

}  // namespace detail

/// Orthogonal matching pursuit for min ||y - D z||_2 s.t. ||z||_0 <= L.
///
/// Each step selects the unused column maximizing |<d_m, r>| / ||d_m||_2
/// (discrete norms on the given grid, lowest index on ties), then refits all
/// selected coefficients by minimum-norm least squares. Stops after L atoms,
/// when ||r||_2 <= residual_tol, or when the best normalized correlation is at
/// round-off level (<= 64 eps ||y||).
template <typename DerivedY, typename DerivedD>
SparseCode<typename DerivedD::Scalar> omp(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedD>& design,
                                          const PursuitParams& params,
                                          OmpTrace<typename DerivedD::Scalar>* trace = nullptr) {
  using Scalar = typename DerivedD::Scalar;
  using Vector = VectorX<Scalar>;
  detail::check_design(y, design);
  params.validate();

  const Eigen::Index atoms = design.cols();
  const Vector signal = y;
  const Vector norms = design.colwise().norm().transpose();
  const Scalar noise_floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * signal.norm();
  std::vector<Eigen::Index> selected;
  std::vector<char> used(static_cast<std::size_t>(atoms), 0);
  Vector coef;
  Vector residual = signal;
  Scalar rnorm = residual.norm();
  if (trace) {
    trace->selected.clear();
    trace->residual_norms.assign(1, rnorm);
  }

  while (static_cast<int>(selected.size()) < params.sparsity_L && rnorm > Scalar(params.residual_tol)) {
    const Vector corr = design.transpose() * residual;
    Eigen::Index best = -1;
    Scalar best_score = 0;
    for (Eigen::Index m = 0; m < atoms; ++m) {
      if (used[m] || norms[m] == Scalar(0)) continue;
      const Scalar score = std::abs(corr[m]) / norms[m];
      if (score > best_score) {
        best_score = score;
        best = m;
      }
    }
    if (best < 0 || best_score <= noise_floor) break;
    used[best] = 1;
    selected.push_back(best);

    const MatrixX<Scalar> sub = design(Eigen::all, selected);
    coef = sub.completeOrthogonalDecomposition().solve(signal);
    residual = signal - sub * coef;
    rnorm = residual.norm();
    if (trace) {
      trace->selected.push_back(best);
      trace->residual_norms.push_back(rnorm);
    }
  }

  SparseCode<Scalar> code(atoms);
  for (std::size_t j = 0; j < selected.size(); ++j)
    if (coef[j] != Scalar(0)) code.set(selected[j], coef[j]);
  return code;
}

/// 1/2 ||y - D z||^2 + lambda ||z||_1, evaluated directly.
template <typename DerivedY, typename DerivedD, typename DerivedZ>
typename DerivedD::Scalar lasso_objective(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedD>& design,
                                          const Eigen::MatrixBase<DerivedZ>& z, typename DerivedD::Scalar lambda) {
  using Scalar = typename DerivedD::Scalar;
  return Scalar(0.5) * (y - design * z).squaredNorm() + lambda * z.template lpNorm<1>();
}

/// l1-relaxed pursuit: proximal gradient (ISTA) on
/// 1/2 ||y - D z||^2 + lambda ||z||_1 from z = 0 with step 1 / sigma_max(D)^2.
/// Stops after max_iters or when the relative objective decrease drops below
/// 1e-10. Coefficients below 1e-12 in magnitude are dropped. If `objective`
/// is given it receives the objective after every iteration.
template <typename DerivedY, typename DerivedD>
SparseCode<typename DerivedD::Scalar> relaxed_pursuit(const Eigen::MatrixBase<DerivedY>& y,
                                                      const Eigen::MatrixBase<DerivedD>& design,
                                                      const PursuitParams& params,
                                                      std::vector<typename DerivedD::Scalar>* objective = nullptr) {
  using Scalar = typename DerivedD::Scalar;
  using Vector = VectorX<Scalar>;
  detail::check_design(y, design);
  params.validate();
  if (!(params.lambda > 0.0)) throw InvalidArgument("relaxed pursuit needs lambda > 0");

  const Eigen::Index atoms = design.cols();
  const Scalar lambda = Scalar(params.lambda);
  // Everything below works in coefficient space through the Gram matrix.
  const MatrixX<Scalar> gram = design.transpose() * design;
  const Vector corr = design.transpose() * y;
  const Scalar energy = y.squaredNorm();
  if (objective) objective->clear();

  SparseCode<Scalar> code(atoms);
  if (atoms == 0) return code;
  const Scalar lipschitz = Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lipschitz > Scalar(0))) return code;
  const Scalar step = Scalar(1) / lipschitz;
  const Scalar threshold = lambda * step;

  auto value = [&](const Vector& z) {
    return Scalar(0.5) * energy - z.dot(corr) + Scalar(0.5) * z.dot(gram * z) + lambda * z.template lpNorm<1>();
  };

  Vector z = Vector::Zero(atoms);
  Scalar f = value(z);
  for (int it = 0; it < params.max_iters; ++it) {
    const Vector g = z - step * (gram * z - corr);
    Vector next = (g.array().abs() - threshold).max(Scalar(0)) * g.array().sign();
    const Scalar f_next = value(next);
    if (objective) objective->push_back(f_next);
    const bool converged = f - f_next <= Scalar(1e-10) * std::max(std::abs(f), std::numeric_limits<Scalar>::min());
    z.swap(next);
    f = f_next;
    if (converged) break;
  }
  return SparseCode<Scalar>::from_dense(z, Scalar(1e-12));
}

struct CodedPatch {
  SparseCode<double> code;
  Eigen::VectorXd residual;  // patch.values - D(G) z
};

/// Samples the dictionary on the patch grid and runs the chosen solver.
CodedPatch code_patch(const Patch& patch, const DictionaryD& dict, const PursuitParams& params, Solver solver);

template <typename Scalar>
SparseCode<Scalar> run_solver(Solver solver, const VectorX<Scalar>& y, const MatrixX<Scalar>& design,
                              const PursuitParams& params) {
  return solver == Solver::omp ? omp(y, design, params) : relaxed_pursuit(y, design, params);
}

}  // namespace clouddict

#endif  // CLOUDDICT_PURSUIT_HPP
