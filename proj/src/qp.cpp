#include "barriernet/qp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace barriernet {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

double QpProblem::objective(const Eigen::VectorXd& u) const {
  return 0.5 * u.dot(H * u) + F.dot(u);
}

void QpProblem::validate() const {
  const Eigen::Index q = dim();
  if (H.rows() != q || H.cols() != q)
    throw std::invalid_argument("QpProblem: H must be q x q");
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != q))
    throw std::invalid_argument("QpProblem: G/h shapes disagree");
  if (lb.size() != q || ub.size() != q)
    throw std::invalid_argument("QpProblem: lb/ub must have length q");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("QpProblem: H is not symmetric");
  for (Eigen::Index i = 0; i < q; ++i) {
    if (lb(i) > ub(i)) throw std::invalid_argument("QpProblem: lb > ub");
  }
}

namespace {

struct ExpandedProblem {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  // origin(i): user row index, or -1 - j for "ub_j", or -1 - q - j for "lb_j".
  std::vector<int> origin;
};

ExpandedProblem expand_rows(const QpProblem& p) {
  const Eigen::Index q = p.dim();
  const Eigen::Index r = p.num_rows();
  Eigen::Index extra = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::isfinite(p.ub(j))) ++extra;
    if (std::isfinite(p.lb(j))) ++extra;
  }
  ExpandedProblem e;
  e.G.setZero(r + extra, q);
  e.h.resize(r + extra);
  e.origin.resize(static_cast<size_t>(r + extra));
  if (r > 0) {
    e.G.topRows(r) = p.G;
    e.h.head(r) = p.h;
  }
  for (Eigen::Index i = 0; i < r; ++i) e.origin[static_cast<size_t>(i)] = static_cast<int>(i);
  Eigen::Index row = r;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::isfinite(p.ub(j))) {
      e.G(row, j) = 1.0;
      e.h(row) = p.ub(j);
      e.origin[static_cast<size_t>(row)] = -1 - static_cast<int>(j);
      ++row;
    }
    if (std::isfinite(p.lb(j))) {
      e.G(row, j) = -1.0;
      e.h(row) = -p.lb(j);
      e.origin[static_cast<size_t>(row)] = -1 - static_cast<int>(q + j);
      ++row;
    }
  }
  return e;
}

struct CoreResult {
  SolveStatus status = SolveStatus::max_iter;
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;  // one entry per expanded row
  int iterations = 0;
};

// Primal active-set iteration on  min 1/2 u'Hu + F'u  s.t. Gu <= h, starting
// from a feasible point. The working set stays linearly independent because a
// blocking row can never lie in the span of the current one.
CoreResult active_set_core(const Eigen::MatrixXd& H, const Eigen::VectorXd& F,
                           const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& u0, const SolverConfig& cfg) {
  const Eigen::Index q = F.size();
  const Eigen::Index m = h.size();

  CoreResult res;
  res.u = u0;
  res.lambda = Eigen::VectorXd::Zero(m);

  std::vector<Eigen::Index> working;
  working.reserve(static_cast<size_t>(std::min<Eigen::Index>(q, m)));

  const double step_tol = 1e-12 * (1.0 + u0.cwiseAbs().maxCoeff());
  // Past this point degenerate cycling is conceivable; switch the leaving rule
  // to Bland's (lowest-index negative multiplier), which terminates.
  const int bland_after = 3 * static_cast<int>(q + m) + 10;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    res.iterations = iter + 1;
    const Eigen::Index w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(q + w, q + w);
    kkt.topLeftCorner(q, q) = H;
    for (Eigen::Index k = 0; k < w; ++k) {
      kkt.block(0, q + k, q, 1) = G.row(working[static_cast<size_t>(k)]).transpose();
      kkt.block(q + k, 0, 1, q) = G.row(working[static_cast<size_t>(k)]);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q + w);
    rhs.head(q) = -(H * res.u + F);
    Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    Eigen::VectorXd p = sol.head(q);

    if (p.cwiseAbs().maxCoeff() <= step_tol) {
      // Stationary on the working set; check multiplier signs.
      Eigen::Index drop = -1;
      if (iter <= bland_after) {
        double most_negative = -cfg.dual_tol;
        for (Eigen::Index k = 0; k < w; ++k) {
          const double lam = sol(q + k);
          if (lam < most_negative) {
            most_negative = lam;
            drop = k;
          }
        }
        if (drop >= 0) {
          // ties resolve to the lowest row index
          Eigen::Index drop_row = working[static_cast<size_t>(drop)];
          for (Eigen::Index k = 0; k < w; ++k) {
            if (sol(q + k) <= most_negative &&
                working[static_cast<size_t>(k)] < drop_row) {
              drop_row = working[static_cast<size_t>(k)];
              drop = k;
            }
          }
        }
      } else {
        Eigen::Index drop_row = m;
        for (Eigen::Index k = 0; k < w; ++k) {
          if (sol(q + k) < -cfg.dual_tol && working[static_cast<size_t>(k)] < drop_row) {
            drop_row = working[static_cast<size_t>(k)];
            drop = k;
          }
        }
      }
      if (drop < 0) {
        res.status = SolveStatus::optimal;
        for (Eigen::Index k = 0; k < w; ++k)
          res.lambda(working[static_cast<size_t>(k)]) = std::max(0.0, sol(q + k));
        return res;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test against rows outside the working set.
    double alpha = 1.0;
    Eigen::Index blocker = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double gp = G.row(i).dot(p);
      if (gp <= 1e-14) continue;
      const double slack = h(i) - G.row(i).dot(res.u);
      const double ai = std::max(0.0, slack / gp);
      if (ai < alpha) {
        alpha = ai;
        blocker = i;
      }
    }
    res.u += alpha * p;
    if (blocker >= 0) working.push_back(blocker);
  }
  return res;  // max_iter
}

// Proximal slack rounds: minimize 1/2 eps |u - u_prev|^2 + 1/2 |s|^2 subject
// to Gu - s <= h, s >= 0, which always admits the feasible start
// (u_prev, relu(G u_prev - h)). Converges to the least-violation point.
std::optional<Eigen::VectorXd> phase1_point(const Eigen::MatrixXd& G,
                                            const Eigen::VectorXd& h,
                                            Eigen::VectorXd u,
                                            const SolverConfig& cfg) {
  const Eigen::Index q = G.cols();
  const Eigen::Index m = G.rows();
  const double eps = 1e-6;

  double prev_viol = kInf;
  for (int round = 0; round < 30; ++round) {
    const double viol = m > 0 ? (G * u - h).maxCoeff() : 0.0;
    if (viol <= cfg.feas_tol) return u;
    if (viol > prev_viol * 0.999) break;  // no progress: genuinely infeasible
    prev_viol = viol;

    Eigen::MatrixXd Hp = Eigen::MatrixXd::Identity(q + m, q + m);
    Hp.topLeftCorner(q, q) *= eps;
    Eigen::VectorXd Fp = Eigen::VectorXd::Zero(q + m);
    Fp.head(q) = -eps * u;

    Eigen::MatrixXd Gp = Eigen::MatrixXd::Zero(2 * m, q + m);
    Eigen::VectorXd hp(2 * m);
    Gp.topLeftCorner(m, q) = G;
    Gp.topRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    hp.head(m) = h;
    Gp.bottomRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    hp.tail(m).setZero();

    Eigen::VectorXd start(q + m);
    start.head(q) = u;
    start.tail(m) = (G * u - h).cwiseMax(0.0);

    SolverConfig inner = cfg;
    inner.max_iter = std::max(cfg.max_iter, 50 * static_cast<int>(q + m));
    CoreResult r = active_set_core(Hp, Fp, Gp, hp, start, inner);
    if (r.status != SolveStatus::optimal) break;
    u = r.u.head(q);
  }
  const double viol = m > 0 ? (G * u - h).maxCoeff() : 0.0;
  if (viol <= cfg.feas_tol) return u;
  return std::nullopt;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const SolverConfig& config) {
  problem.validate();
  const Eigen::Index q = problem.dim();
  const Eigen::Index r = problem.num_rows();
  const ExpandedProblem e = expand_rows(problem);

  QpSolution out;
  out.lambda = Eigen::VectorXd::Zero(r);
  out.mu_lower = Eigen::VectorXd::Zero(q);
  out.mu_upper = Eigen::VectorXd::Zero(q);

  // Start from zero clamped into the box; go through phase 1 only if needed.
  Eigen::VectorXd u0(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double lo = problem.lb(j);
    const double hi = problem.ub(j);
    u0(j) = std::min(std::max(0.0, lo), hi);
  }
  const bool start_feasible =
      e.h.size() == 0 || (e.G * u0 - e.h).maxCoeff() <= config.feas_tol;
  if (!start_feasible) {
    auto feasible = phase1_point(e.G, e.h, u0, config);
    if (!feasible) {
      out.status = SolveStatus::infeasible;
      return out;
    }
    u0 = *feasible;
  }

  CoreResult core = active_set_core(problem.H, problem.F, e.G, e.h, u0, config);
  out.status = core.status;
  out.u = core.u;
  out.iterations = core.iterations;
  out.objective = problem.objective(core.u);
  for (Eigen::Index i = 0; i < e.h.size(); ++i) {
    const int origin = e.origin[static_cast<size_t>(i)];
    if (origin >= 0) {
      out.lambda(origin) = core.lambda(i);
    } else {
      const int j = -1 - origin;
      if (j < q)
        out.mu_upper(j) = core.lambda(i);
      else
        out.mu_lower(j - static_cast<int>(q)) = core.lambda(i);
    }
  }
  for (Eigen::Index i = 0; i < r; ++i) {
    if (problem.G.row(i).dot(core.u) - problem.h(i) >= -config.active_tol)
      out.active_set.push_back(static_cast<int>(i));
  }
  return out;
}

double kkt_residual(const QpProblem& problem, const QpSolution& solution) {
  const Eigen::Index q = problem.dim();
  const Eigen::Index r = problem.num_rows();
  const Eigen::VectorXd& u = solution.u;

  Eigen::VectorXd stat = problem.H * u + problem.F;
  if (r > 0) stat += problem.G.transpose() * solution.lambda;
  stat += solution.mu_upper - solution.mu_lower;
  double res = stat.cwiseAbs().maxCoeff();

  if (r > 0) {
    const Eigen::VectorXd slack = problem.G * u - problem.h;
    res = std::max(res, slack.maxCoeff());
    res = std::max(res, -solution.lambda.minCoeff());
    res = std::max(res, (solution.lambda.array() * slack.array()).abs().maxCoeff());
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::isfinite(problem.lb(j))) {
      res = std::max(res, problem.lb(j) - u(j));
      res = std::max(res, std::abs(solution.mu_lower(j) * (u(j) - problem.lb(j))));
    }
    if (std::isfinite(problem.ub(j))) {
      res = std::max(res, u(j) - problem.ub(j));
      res = std::max(res, std::abs(solution.mu_upper(j) * (problem.ub(j) - u(j))));
    }
    res = std::max(res, -solution.mu_lower(j));
    res = std::max(res, -solution.mu_upper(j));
  }
  return res;
}

}  // namespace barriernet
