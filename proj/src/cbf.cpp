#include "barriernet/cbf.hpp"

#include <cmath>
#include <stdexcept>

#include "barriernet/systems.hpp"

namespace barriernet {

double ClassK::value(double s) const {
  switch (kind) {
    case Kind::linear:
      return gain * s;
    case Kind::odd_power:
      return gain * std::pow(s, power);
  }
  return 0.0;
}

double ClassK::slope(double s) const {
  switch (kind) {
    case Kind::linear:
      return gain;
    case Kind::odd_power:
      return gain * power * std::pow(s, power - 1);
  }
  return 0.0;
}

LiePoint lie_point(const HocbfConstraint& c, const Eigen::VectorXd& x) {
  LiePoint pt;
  pt.b = c.b(x);
  pt.lf_b = c.lf_b(x);
  if (c.rel_degree >= 2) pt.lf2_b = c.lf2_b(x);
  pt.lglf_b = c.lglf_b(x);
  return pt;
}

Eigen::VectorXd psi_eval(const HocbfConstraint& c, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& penalties) {
  if (penalties.size() < c.rel_degree)
    throw std::invalid_argument("psi_eval: need one penalty per order");
  if (penalties.minCoeff() <= 0.0)
    throw std::invalid_argument("psi_eval: penalties must be positive");
  Eigen::VectorXd psi(c.rel_degree);
  const LiePoint pt = lie_point(c, x);
  psi(0) = pt.b;
  if (c.rel_degree == 2)
    psi(1) = pt.lf_b + penalties(0) * c.alphas[0].value(pt.b);
  return psi;
}

double psi_terminal(const HocbfRow& row, const Eigen::VectorXd& u) {
  return row.h - row.g_row.dot(u);
}

HocbfRow assemble_row(const LiePoint& pt, int rel_degree,
                      const std::vector<ClassK>& alphas,
                      const Eigen::VectorXd& penalties) {
  if (rel_degree < 1 || rel_degree > 2)
    throw std::invalid_argument("assemble_row: rel_degree must be 1 or 2");
  if (static_cast<int>(alphas.size()) < rel_degree ||
      penalties.size() < rel_degree)
    throw std::invalid_argument("assemble_row: need one alpha/penalty per order");
  HocbfRow row;
  row.g_row = -pt.lglf_b;
  row.dh_dp.resize(rel_degree);
  if (rel_degree == 1) {
    // L_f b + L_g b . u + p1 a1(b) >= 0
    row.h = pt.lf_b + penalties(0) * alphas[0].value(pt.b);
    row.dh_dp(0) = alphas[0].value(pt.b);
  } else {
    // psi1 = L_f b + p1 a1(b); with pdot terms held at zero the constraint is
    // L_f^2 b + L_g L_f b . u + p1 a1'(b) L_f b + p2 a2(psi1) >= 0
    const double psi1 = pt.lf_b + penalties(0) * alphas[0].value(pt.b);
    row.h = pt.lf2_b + penalties(0) * alphas[0].slope(pt.b) * pt.lf_b +
            penalties(1) * alphas[1].value(psi1);
    row.dh_dp(0) = alphas[0].slope(pt.b) * pt.lf_b +
                   penalties(1) * alphas[1].slope(psi1) * alphas[0].value(pt.b);
    row.dh_dp(1) = alphas[1].value(psi1);
  }
  return row;
}

HocbfRow assemble_row(const HocbfConstraint& c, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& penalties) {
  return assemble_row(lie_point(c, x), c.rel_degree, c.alphas, penalties);
}

bool row_is_degenerate(const HocbfRow& row, double eps) {
  return row.g_row.cwiseAbs().maxCoeff() < eps;
}

double LieCheckReport::max_residual() const {
  return std::max({lf_residual, lf2_residual, lglf_residual});
}

LieCheckReport lie_check(const HocbfConstraint& c, const AffineSystem& system,
                         const Eigen::VectorXd& x, double dt) {
  if (dt < 1e-6 || dt > 1e-3)
    throw std::invalid_argument("lie_check: dt outside [1e-6, 1e-3]");
  LieCheckReport rep;
  const Eigen::VectorXd fx = system.f(x);

  const double lf_num = (c.b(x + dt * fx) - c.b(x)) / dt;
  rep.lf_residual = std::abs(c.lf_b(x) - lf_num);

  if (c.rel_degree >= 2) {
    const double lf2_num =
        (c.b(x + dt * fx) - 2.0 * c.b(x) + c.b(x - dt * fx)) / (dt * dt);
    rep.lf2_residual = std::abs(c.lf2_b(x) - lf2_num);
  }

  const Eigen::MatrixXd gx = system.g(x);
  const Eigen::VectorXd lglf = c.lglf_b(x);
  const auto scalar = c.rel_degree >= 2 ? c.lf_b : c.b;
  for (Eigen::Index j = 0; j < gx.cols(); ++j) {
    const Eigen::VectorXd dir = gx.col(j);
    const double num = (scalar(x + dt * dir) - scalar(x)) / dt;
    rep.lglf_residual = std::max(rep.lglf_residual, std::abs(lglf(j) - num));
  }
  return rep;
}

}  // namespace barriernet
