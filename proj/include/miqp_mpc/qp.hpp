#pragma once

/**
 * @file
 * @brief Iteration-limited convex QP solver.
 *
 * Solves  min 1/2 y'Hy + c'y + constant
 *         s.t. C y <= b,  E y = e,  lo <= y <= hi
 * with H symmetric positive semidefinite. The backend is a proximal-point
 * outer loop around a semismooth Newton method on the penalized
 * Fischer-Burmeister optimality system. One iteration is one Newton step;
 * proximal updates are free.
 */

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <memory>
#include <optional>
#include <vector>

namespace miqp_mpc {

/// Immutable problem data shared between node subproblems.
struct QpData {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd C;
  Eigen::VectorXd b;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  double constant = 0.0;

  Eigen::SparseMatrix<double> Hs;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Cs;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Es;

  /// Ruiz equilibration: y = var_scale .* y_hat; scaled rows are
  /// ineq_scale .* C and eq_scale .* E; the scaled objective is cost_scale * f.
  Eigen::VectorXd var_scale;
  Eigen::VectorXd ineq_scale;
  Eigen::VectorXd eq_scale;
  double cost_scale = 1.0;
  /// Data in equilibrated coordinates; null on the scaled copy itself.
  std::shared_ptr<const QpData> scaled;
};

class QpProblem {
 public:
  /// Validates sizes (DimensionMismatch), lo <= hi (InfeasibleBoxes) and
  /// PSD-ness of H (NonPsdHessian, smallest eigenvalue below -1e-9).
  QpProblem(Eigen::MatrixXd H, Eigen::VectorXd c, Eigen::MatrixXd C, Eigen::VectorXd b,
            Eigen::MatrixXd E, Eigen::VectorXd e, Eigen::VectorXd lo, Eigen::VectorXd hi,
            double constant = 0.0);

  /// Unbounded variables, no rows.
  static QpProblem unconstrained(Eigen::MatrixXd H, Eigen::VectorXd c);

  /// Same matrices, different variable bounds. Skips the Hessian check.
  QpProblem with_bounds(Eigen::VectorXd lo, Eigen::VectorXd hi) const;

  /// The problem in equilibrated coordinates (see QpData::var_scale).
  QpProblem equilibrated() const;

  Eigen::Index num_vars() const { return data_->c.size(); }
  Eigen::Index num_ineq() const { return data_->b.size(); }
  Eigen::Index num_eq() const { return data_->e.size(); }
  /// m + p + 2n: [C rows; E rows; upper bounds; lower bounds].
  Eigen::Index dual_size() const { return num_ineq() + num_eq() + 2 * num_vars(); }

  const QpData& data() const { return *data_; }
  const Eigen::VectorXd& lower() const { return lo_; }
  const Eigen::VectorXd& upper() const { return hi_; }

  double objective(const Eigen::VectorXd& y) const;
  /// l-inf norm of constraint violation: |Ey-e|, (Cy-b)+, and bound excess.
  double primal_residual(const Eigen::VectorXd& y) const;

 private:
  QpProblem(std::shared_ptr<const QpData> data, Eigen::VectorXd lo, Eigen::VectorXd hi);
  void check_bounds() const;

  std::shared_ptr<const QpData> data_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
};

enum class QpStatus { Optimal, IterationLimited, PrimalInfeasible };

const char* to_string(QpStatus status);

struct QpTolerances {
  double primal = 1e-6;
  double dual = 1e-6;
};

struct QpSolverOptions {
  double sigma = 1e-6;        ///< proximal parameter
  double sigma_floor = 1e-9;  ///< added to sigma in every Newton system
  double alpha = 0.95;        ///< Fischer-Burmeister penalty weight
  double armijo = 1e-4;
  int max_backtracks = 30;
  int nonmonotone_memory = 10;  ///< merits remembered by the line search (1 = monotone)
  bool equilibrate = true;    ///< iterate on the Ruiz-scaled problem
};

struct QpWarmStart {
  Eigen::VectorXd y;
  Eigen::VectorXd dual;  ///< empty, or dual_size() entries
};

struct QpResult {
  QpStatus status = QpStatus::IterationLimited;
  Eigen::VectorXd iterate;
  Eigen::VectorXd dual;  ///< [lambda_C; mu; upper; lower]
  double primal_residual_inf = 0.0;
  double dual_residual_inf = 0.0;
  int iterations_used = 0;
  double objective = 0.0;
  /// Farkas ray in the dual layout; empty unless PrimalInfeasible.
  Eigen::VectorXd certificate;
};

/// Returns Optimal as soon as both residuals meet tolerance, PrimalInfeasible
/// when a dual ray certifies an empty feasible set, otherwise IterationLimited
/// with the best iterate visited (lowest primal residual, then objective,
/// then earliest).
QpResult solve_qp(const QpProblem& problem, const std::optional<QpWarmStart>& warm_start,
                  int max_iters, const QpTolerances& tol = {}, const QpSolverOptions& options = {});

/// Dual residual of (y, dual): max of stationarity and complementarity l-inf norms.
double dual_residual(const QpProblem& problem, const Eigen::VectorXd& y, const Eigen::VectorXd& dual);

struct CertificateCheck {
  double stationarity_inf;  ///< |C'l + E'mu + l_U - l_L|_inf
  double rhs;               ///< b'l + e'mu + hi'l_U - lo'l_L
  double min_ineq_multiplier;
  double scale;             ///< |ray|_inf
  bool valid;
};

/// Checks a ray against stationarity <= 1e-6 (1 + |ray|_inf), rhs < 0 and
/// nonnegative inequality multipliers (to -1e-12).
CertificateCheck check_certificate(const QpProblem& problem, const Eigen::VectorXd& ray);

}  // namespace miqp_mpc
