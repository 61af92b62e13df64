#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "barriernet/qp.hpp"
#include "support/brute_force_qp.hpp"
#include "support/random_qp.hpp"

using namespace barriernet;
using barriernet::testing::brute_force_qp;
using barriernet::testing::random_qp;

namespace {

QpProblem unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& F) {
  QpProblem p;
  p.H = H;
  p.F = F;
  p.G.resize(0, F.size());
  p.h.resize(0);
  p.lb = Eigen::VectorXd::Constant(F.size(), -kInf);
  p.ub = Eigen::VectorXd::Constant(F.size(), kInf);
  return p;
}

// Samples a feasible point by walking from a known interior point toward a
// random box point and stopping before the first constraint boundary.
Eigen::VectorXd random_feasible_point(const QpProblem& p,
                                      const Eigen::VectorXd& interior,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  Eigen::VectorXd target(p.dim());
  for (Eigen::Index j = 0; j < p.dim(); ++j) {
    const double lo = std::isfinite(p.lb(j)) ? p.lb(j) : interior(j) - 5.0;
    const double hi = std::isfinite(p.ub(j)) ? p.ub(j) : interior(j) + 5.0;
    target(j) = lo + 0.5 * (1.0 + unit(rng)) * (hi - lo);
  }
  const Eigen::VectorXd d = target - interior;
  double tmax = 1.0;
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    const double gd = p.G.row(i).dot(d);
    if (gd > 1e-14) tmax = std::min(tmax, (p.h(i) - p.G.row(i).dot(interior)) / gd);
  }
  return interior + frac(rng) * tmax * d;
}

}  // namespace

TEST_CASE("unconstrained minimum of 1/2|u|^2 is the origin") {
  auto p = unconstrained(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  auto sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.u.norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sol.lambda.size() == 0);
  CHECK(sol.active_set.empty());
}

TEST_CASE("1-d bound-active QP matches the analytic KKT point and a grid search") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(1, 1);
  p.F = Eigen::VectorXd::Constant(1, -4.0);
  p.G = Eigen::MatrixXd::Ones(1, 1);
  p.h = Eigen::VectorXd::Ones(1);
  p.lb = Eigen::VectorXd::Constant(1, -kInf);
  p.ub = Eigen::VectorXd::Constant(1, kInf);

  // Independent oracle: exhaustive grid over the feasible interval.
  double best_u = 0.0, best_obj = kInf;
  for (double u = -10.0; u <= 1.0 + 1e-12; u += 1e-4) {
    const double obj = 0.5 * u * u - 4.0 * u;
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
    }
  }
  CHECK(best_u == doctest::Approx(1.0).epsilon(1e-3));

  auto sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.u(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.lambda(0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(sol.active_set == std::vector<int>{0});

  SUBCASE("kkt_residual certifies the analytic solution") {
    CHECK(kkt_residual(p, sol) <= 1e-10);
  }
  SUBCASE("kkt_residual grows linearly under a primal perturbation") {
    QpSolution bad = sol;
    bad.u(0) += 0.1;
    CHECK(kkt_residual(p, bad) >= 0.09);
  }
}

TEST_CASE("box-constrained least squares clamps coordinatewise for identity H") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.F = Eigen::VectorXd::Constant(2, -1.0);
  p.G.resize(0, 2);
  p.h.resize(0);
  p.lb = Eigen::VectorXd::Zero(2);
  p.ub.resize(2);
  p.ub << 0.5, 2.0;

  // Projected-gradient oracle.
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2);
  for (int it = 0; it < 2000; ++it) {
    u -= 0.1 * (p.H * u + p.F);
    u = u.cwiseMax(p.lb).cwiseMin(p.ub);
  }
  CHECK((u - Eigen::Vector2d(0.5, 1.0)).cwiseAbs().maxCoeff() < 1e-8);

  auto sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.u(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.u(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.mu_upper(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(kkt_residual(p, sol) <= 1e-10);
}

TEST_CASE("kkt_residual of an exact unconstrained solution is at noise level") {
  Eigen::MatrixXd H(2, 2);
  H << 3.0, 0.5, 0.5, 2.0;
  Eigen::VectorXd F(2);
  F << 1.0, -2.0;
  auto p = unconstrained(H, F);
  QpSolution sol;
  sol.status = SolveStatus::optimal;
  sol.u = -H.ldlt().solve(F);
  sol.lambda.resize(0);
  sol.mu_lower = Eigen::VectorXd::Zero(2);
  sol.mu_upper = Eigen::VectorXd::Zero(2);
  CHECK(kkt_residual(p, sol) <= 1e-10);
}

TEST_CASE("conflicting row and box report infeasible") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(1, 1);
  p.F = Eigen::VectorXd::Zero(1);
  p.G = Eigen::MatrixXd::Ones(1, 1);
  p.h = Eigen::VectorXd::Constant(1, -1.0);  // u <= -1
  p.lb = Eigen::VectorXd::Zero(1);           // u >= 0
  p.ub = Eigen::VectorXd::Constant(1, kInf);
  auto sol = solve_qp(p);
  CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("iteration budget of zero reports max_iter") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(1, 1);
  p.F = Eigen::VectorXd::Constant(1, -4.0);
  p.G = Eigen::MatrixXd::Ones(1, 1);
  p.h = Eigen::VectorXd::Ones(1);
  p.lb = Eigen::VectorXd::Constant(1, -kInf);
  p.ub = Eigen::VectorXd::Constant(1, kInf);
  SolverConfig cfg;
  cfg.max_iter = 1;
  auto sol = solve_qp(p, cfg);
  CHECK(sol.status == SolveStatus::max_iter);
}

TEST_CASE("equal lower and upper bound pins the variable") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.F.resize(2);
  p.F << -3.0, 0.0;
  p.G.resize(0, 2);
  p.h.resize(0);
  p.lb.resize(2);
  p.ub.resize(2);
  p.lb << 1.0, -1.0;
  p.ub << 1.0, 1.0;
  auto sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.u(0) == doctest::Approx(1.0));
  CHECK(sol.u(1) == doctest::Approx(0.0));
}

TEST_CASE("validate rejects malformed problems") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.H(0, 1) = 0.5;  // asymmetric
  p.F = Eigen::VectorXd::Zero(2);
  p.G.resize(0, 2);
  p.h.resize(0);
  p.lb = Eigen::VectorXd::Constant(2, -kInf);
  p.ub = Eigen::VectorXd::Constant(2, kInf);
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);

  p.H(0, 1) = 0.0;
  p.lb(0) = 2.0;
  p.ub(0) = 1.0;
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);
}

TEST_CASE("random problems: oracle equivalence, dual signs, objective optimality") {
  std::mt19937_64 rng(1234);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto [p, interior] = random_qp(rng);
    auto sol = solve_qp(p);
    REQUIRE(sol.status == SolveStatus::optimal);
    auto oracle = brute_force_qp(p);
    REQUIRE(oracle.found);
    CHECK((sol.u - oracle.u).cwiseAbs().maxCoeff() <= 1e-6);
    if (p.num_rows() > 0) {
      CHECK((sol.lambda - oracle.lambda).cwiseAbs().maxCoeff() <= 1e-6);
      // inactive rows carry (numerically) zero duals
      for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
        const double slack = p.h(i) - p.G.row(i).dot(sol.u);
        if (slack > 1e-6) CHECK(sol.lambda(i) <= 1e-8);
      }
      CHECK(sol.lambda.minCoeff() >= 0.0);
    }
    CHECK(kkt_residual(p, sol) <= 1e-6);

    // objective no worse than sampled feasible points
    for (int s = 0; s < 100; ++s) {
      const Eigen::VectorXd x = random_feasible_point(p, interior, rng);
      CHECK(sol.objective <= p.objective(x) + 1e-9);
    }
    ++checked;
  }
  CHECK(checked == 300);
}
