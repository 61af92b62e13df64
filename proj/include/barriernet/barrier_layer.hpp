#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "barriernet/cbf.hpp"
#include "barriernet/qp.hpp"

namespace barriernet {

/// Ridge added to L L^T so the cost stays positive definite.
inline constexpr double kHessianRidge = 1e-6;
/// Quadratic weight on the per-row slack used by the relaxation retry.
inline constexpr double kSlackWeight = 1e4;

/// Inputs of one BarrierNet neuron at one time step. The tracking cost
/// |u - f_ref|^2 is realized as H = 2I, F = -2 f_ref; an optional
/// lower-triangular factor L switches H to L L^T + ridge * I instead.
struct BarrierLayerInput {
  Eigen::VectorXd f_ref;
  std::vector<HocbfRow> rows;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  std::optional<Eigen::MatrixXd> h_factor;
  bool allow_relaxation = false;
};

/// Everything the backward pass needs from the forward solve. When the solve
/// was relaxed, the cached problem is the slack-extended one and u holds the
/// extended primal; the first q entries are the control.
struct ForwardCache {
  SolveStatus status = SolveStatus::infeasible;
  bool relaxed = false;
  Eigen::Index q = 0;
  Eigen::MatrixXd H;
  Eigen::VectorXd F;
  Eigen::MatrixXd G;       // every inequality row, bounds expanded
  Eigen::VectorXd h;
  Eigen::VectorXd lambda;  // duals on G rows
  Eigen::VectorXd u;       // full primal (extended when relaxed)
  std::vector<int> row_input;  // per G row: index into input rows, or -1
  std::vector<HocbfRow> rows;  // input rows (carry dh/dp for penalty routing)
  std::optional<Eigen::MatrixXd> h_factor;
  int dropped_rows = 0;
  double solve_us = 0.0;

  Eigen::VectorXd control() const { return u.head(q); }
};

struct LayerGradients {
  Eigen::MatrixXd dH;          // symmetric q x q
  Eigen::VectorXd dF;          // q
  Eigen::VectorXd d_f_ref;     // chain through F = -2 f_ref
  Eigen::VectorXd dh;          // one entry per input row; zero when untrainable
  Eigen::MatrixXd d_penalties; // rows x max order, via the cached dh/dp
  std::optional<Eigen::MatrixXd> d_h_factor;
  bool degenerate = false;     // KKT system singular even after the ridge
};

std::pair<Eigen::VectorXd, ForwardCache> layer_forward(
    const BarrierLayerInput& input, const SolverConfig& config = {});

/// Implicit differentiation through the KKT conditions of the cached solve.
/// Rows whose dual is (numerically) zero are treated as inactive, matching the
/// finite-difference limit from the interior.
LayerGradients layer_backward(const ForwardCache& cache,
                              const Eigen::VectorXd& dl_du);

/// One constraint of a gradient-check instance: frozen Lie values plus the
/// penalties its row is assembled with.
struct GradCheckConstraint {
  LiePoint point;
  int rel_degree = 1;
  std::vector<ClassK> alphas;
  Eigen::VectorXd penalties;
};

struct GradCheckCase {
  Eigen::VectorXd f_ref;
  std::vector<GradCheckConstraint> constraints;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  std::optional<Eigen::MatrixXd> h_factor;
  Eigen::VectorXd dl_du;
};

struct GradCheckReport {
  bool skipped = false;  // the active set flipped under perturbation
  bool solved = false;
  int params_checked = 0;
  double max_err = 0.0;
  bool passed(double tol = 1e-4) const { return solved && !skipped && max_err <= tol; }
};

/// Central finite differences of the full forward solve against the analytic
/// gradients, for every f_ref entry, penalty, row offset and factor entry.
GradCheckReport grad_check(const GradCheckCase& instance, double fd_step = 1e-5);

struct GradCheckSummary {
  int evaluated = 0;
  int passed = 0;
  int skipped = 0;
  int failed = 0;
  double max_err = 0.0;
};

/// Runs grad_check on `count` random instances (q <= 3, up to 4 rows) sampled
/// away from active-set boundaries; boundary flips are counted as skipped and
/// replaced by fresh draws.
GradCheckSummary run_gradcheck(int count, uint64_t seed, double tol = 1e-4);

}  // namespace barriernet
