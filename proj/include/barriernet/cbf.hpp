#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace barriernet {

struct AffineSystem;

/// Strictly increasing function with alpha(0) = 0. Linear is the default the
/// case studies use; odd integer powers stay class-K on the whole real line.
struct ClassK {
  enum class Kind { linear, odd_power };
  Kind kind = Kind::linear;
  double gain = 1.0;
  int power = 3;  // only read for odd_power; must be odd and >= 3

  double value(double s) const;
  double slope(double s) const;
};

/// One safety constraint b(x) >= 0 of relative degree m in {1, 2}, with
/// hand-coded Lie-derivative evaluators.
struct HocbfConstraint {
  std::string name;
  int rel_degree = 1;
  std::vector<ClassK> alphas;  // one per order
  std::function<double(const Eigen::VectorXd&)> b;
  std::function<double(const Eigen::VectorXd&)> lf_b;
  std::function<double(const Eigen::VectorXd&)> lf2_b;          // m = 2 only
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> lglf_b;  // L_g L_f^{m-1} b
};

/// One QP inequality row G_row . u <= h encoding the softened constraint at
/// the current state, with the partials needed by the backward pass.
struct HocbfRow {
  Eigen::VectorXd g_row;
  double h = 0.0;
  bool trainable = true;
  Eigen::VectorXd dh_dp;  // dh/dp_i, one entry per order
  int constraint_index = 0;
};

/// Softened sequence values psi_0 .. psi_{m-1}; psi_m is control-dependent and
/// is carried by the row (psi_m(u) = h - G_row . u).
Eigen::VectorXd psi_eval(const HocbfConstraint& c, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& penalties);

double psi_terminal(const HocbfRow& row, const Eigen::VectorXd& u);

/// Raw Lie-derivative values of one constraint at one state. Kept separate so
/// a row can be reassembled at perturbed penalties without re-touching x.
struct LiePoint {
  double b = 0.0;
  double lf_b = 0.0;
  double lf2_b = 0.0;
  Eigen::VectorXd lglf_b;
};

LiePoint lie_point(const HocbfConstraint& c, const Eigen::VectorXd& x);

HocbfRow assemble_row(const LiePoint& pt, int rel_degree,
                      const std::vector<ClassK>& alphas,
                      const Eigen::VectorXd& penalties);

HocbfRow assemble_row(const HocbfConstraint& c, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& penalties);

bool row_is_degenerate(const HocbfRow& row, double eps = 1e-12);

/// Residuals of the hand-coded Lie derivatives against numerical
/// differentiation along the drift and the control directions.
struct LieCheckReport {
  double lf_residual = 0.0;
  double lf2_residual = 0.0;
  double lglf_residual = 0.0;
  double max_residual() const;
};

LieCheckReport lie_check(const HocbfConstraint& c, const AffineSystem& system,
                         const Eigen::VectorXd& x, double dt);

}  // namespace barriernet
