#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace barriernet {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SolveStatus { optimal, infeasible, max_iter };

const char* to_string(SolveStatus status);

struct SolverConfig {
  int max_iter = 500;
  /// A point is accepted as feasible when every constraint holds within this.
  double feas_tol = 1e-8;
  /// Rows with G u* - h >= -active_tol are reported in the active set.
  double active_tol = 1e-7;
  /// Multipliers above -dual_tol count as nonnegative at optimality.
  double dual_tol = 1e-9;
};

/// Strictly convex dense QP
///
///   min_u  1/2 u^T H u + F^T u
///   s.t.   G u <= h,   lb <= u <= ub  (entries of lb/ub may be +-inf)
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd F;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index dim() const { return F.size(); }
  Eigen::Index num_rows() const { return h.size(); }
  double objective(const Eigen::VectorXd& u) const;
  /// Throws std::invalid_argument when shapes disagree, H is asymmetric
  /// beyond 1e-10, or lb > ub somewhere.
  void validate() const;
};

struct QpSolution {
  SolveStatus status = SolveStatus::infeasible;
  Eigen::VectorXd u;
  /// Duals on the G rows, >= 0 at optimality.
  Eigen::VectorXd lambda;
  /// Duals on the box rows (-u <= -lb resp. u <= ub); zero for infinite bounds.
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd mu_upper;
  /// Indices of G rows with G u* - h >= -active_tol.
  std::vector<int> active_set;
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

/// Dense primal active-set solve. Box bounds are expanded to rows internally;
/// ties in working-set selection are broken by lowest row index, so the result
/// is deterministic.
QpSolution solve_qp(const QpProblem& problem, const SolverConfig& config = {});

/// Max of the stationarity, primal-feasibility, dual-nonnegativity and
/// complementarity residuals of a solution certificate.
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

}  // namespace barriernet
