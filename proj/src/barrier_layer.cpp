#include "barriernet/barrier_layer.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace barriernet {

namespace {

constexpr double kDualActiveTol = 1e-9;
constexpr double kKktRidge = 1e-10;

Eigen::MatrixXd cost_matrix(const BarrierLayerInput& input) {
  const Eigen::Index q = input.f_ref.size();
  if (!input.h_factor) return 2.0 * Eigen::MatrixXd::Identity(q, q);
  const Eigen::MatrixXd& L = *input.h_factor;
  if (L.rows() != q || L.cols() != q)
    throw std::invalid_argument("layer_forward: h_factor must be q x q");
  return L * L.transpose() + kHessianRidge * Eigen::MatrixXd::Identity(q, q);
}

struct ExpandedRows {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::VectorXd lambda;
  std::vector<int> input_index;
};

// Flatten user rows plus the solution's bound duals into one row list so the
// backward system sees every constraint that can pin the solution.
ExpandedRows expand(const QpProblem& p, const QpSolution& sol,
                    const std::vector<int>& user_index) {
  const Eigen::Index q = p.dim();
  const Eigen::Index r = p.num_rows();
  Eigen::Index extra = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::isfinite(p.ub(j))) ++extra;
    if (std::isfinite(p.lb(j))) ++extra;
  }
  ExpandedRows e;
  e.G.setZero(r + extra, q);
  e.h.resize(r + extra);
  e.lambda.resize(r + extra);
  e.input_index.assign(static_cast<size_t>(r + extra), -1);
  if (r > 0) {
    e.G.topRows(r) = p.G;
    e.h.head(r) = p.h;
    e.lambda.head(r) = sol.lambda;
    for (Eigen::Index i = 0; i < r; ++i)
      e.input_index[static_cast<size_t>(i)] = user_index[static_cast<size_t>(i)];
  }
  Eigen::Index row = r;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::isfinite(p.ub(j))) {
      e.G(row, j) = 1.0;
      e.h(row) = p.ub(j);
      e.lambda(row) = sol.mu_upper(j);
      ++row;
    }
    if (std::isfinite(p.lb(j))) {
      e.G(row, j) = -1.0;
      e.h(row) = -p.lb(j);
      e.lambda(row) = sol.mu_lower(j);
      ++row;
    }
  }
  return e;
}

}  // namespace

std::pair<Eigen::VectorXd, ForwardCache> layer_forward(
    const BarrierLayerInput& input, const SolverConfig& config) {
  const Eigen::Index q = input.f_ref.size();
  ForwardCache cache;
  cache.q = q;
  cache.rows = input.rows;
  cache.h_factor = input.h_factor;

  const Eigen::MatrixXd H = cost_matrix(input);
  const Eigen::VectorXd F = -2.0 * input.f_ref;

  // Degenerate rows (vanishing control coefficient) reduce to 0 <= h: satisfied
  // ones are dropped, violated ones stay so infeasibility is reported.
  std::vector<int> keep;
  for (size_t i = 0; i < input.rows.size(); ++i) {
    if (row_is_degenerate(input.rows[i]) && input.rows[i].h >= 0.0) {
      ++cache.dropped_rows;
      continue;
    }
    keep.push_back(static_cast<int>(i));
  }

  QpProblem p;
  p.H = H;
  p.F = F;
  p.G.resize(static_cast<Eigen::Index>(keep.size()), q);
  p.h.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    p.G.row(static_cast<Eigen::Index>(k)) =
        input.rows[static_cast<size_t>(keep[k])].g_row.transpose();
    p.h(static_cast<Eigen::Index>(k)) = input.rows[static_cast<size_t>(keep[k])].h;
  }
  p.lb = input.lb;
  p.ub = input.ub;

  const auto t0 = std::chrono::steady_clock::now();
  QpSolution sol = solve_qp(p, config);
  bool relaxed = false;

  if (sol.status == SolveStatus::infeasible && input.allow_relaxation &&
      !keep.empty()) {
    const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
    QpProblem px;
    px.H = Eigen::MatrixXd::Zero(q + r, q + r);
    px.H.topLeftCorner(q, q) = H;
    px.H.bottomRightCorner(r, r) = kSlackWeight * Eigen::MatrixXd::Identity(r, r);
    px.F = Eigen::VectorXd::Zero(q + r);
    px.F.head(q) = F;
    px.G.setZero(r, q + r);
    px.G.leftCols(q) = p.G;
    px.G.rightCols(r) = -Eigen::MatrixXd::Identity(r, r);
    px.h = p.h;
    px.lb = Eigen::VectorXd::Constant(q + r, -kInf);
    px.lb.head(q) = input.lb;
    px.lb.tail(r).setZero();
    px.ub = Eigen::VectorXd::Constant(q + r, kInf);
    px.ub.head(q) = input.ub;
    sol = solve_qp(px, config);
    relaxed = true;
    p = std::move(px);
  }
  const auto t1 = std::chrono::steady_clock::now();
  cache.solve_us = std::chrono::duration<double, std::micro>(t1 - t0).count();

  cache.status = sol.status;
  cache.relaxed = relaxed;
  if (sol.status != SolveStatus::optimal) {
    cache.u = Eigen::VectorXd::Zero(relaxed ? q + static_cast<Eigen::Index>(keep.size()) : q);
    return {Eigen::VectorXd::Zero(q), cache};
  }

  cache.H = p.H;
  cache.F = p.F;
  ExpandedRows e = expand(p, sol, keep);
  cache.G = std::move(e.G);
  cache.h = std::move(e.h);
  cache.lambda = std::move(e.lambda);
  cache.row_input = std::move(e.input_index);
  cache.u = sol.u;
  return {cache.control(), cache};
}

LayerGradients layer_backward(const ForwardCache& cache,
                              const Eigen::VectorXd& dl_du) {
  if (cache.status != SolveStatus::optimal)
    throw std::logic_error("layer_backward: forward pass was not optimal");
  const Eigen::Index q = cache.q;
  const Eigen::Index dim = cache.u.size();
  if (dl_du.size() != q)
    throw std::invalid_argument("layer_backward: dl_du must have control length");

  LayerGradients out;
  out.dh = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cache.rows.size()));
  int max_order = 0;
  for (const auto& row : cache.rows)
    max_order = std::max(max_order, static_cast<int>(row.dh_dp.size()));
  out.d_penalties = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(cache.rows.size()), max_order);

  // Rows with numerically zero duals decouple from the sensitivity system.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < cache.h.size(); ++i)
    if (cache.lambda(i) > kDualActiveTol) active.push_back(i);
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());

  // [H  Ga'; Ga  0] [d_u; y] = [-dl; 0] with y = D(lambda) d_lambda, obtained
  // from the KKT conditions of the solved QP; grad_h = -y on active rows.
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim + na, dim + na);
  K.topLeftCorner(dim, dim) = cache.H;
  for (Eigen::Index k = 0; k < na; ++k) {
    K.block(0, dim + k, dim, 1) = cache.G.row(active[static_cast<size_t>(k)]).transpose();
    K.block(dim + k, 0, 1, dim) = cache.G.row(active[static_cast<size_t>(k)]);
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim + na);
  rhs.head(q) = -dl_du;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) {
    K.diagonal().array() += kKktRidge;
    lu.compute(K);
    if (!lu.isInvertible()) {
      out.degenerate = true;
      out.dH = Eigen::MatrixXd::Zero(q, q);
      out.dF = Eigen::VectorXd::Zero(q);
      out.d_f_ref = Eigen::VectorXd::Zero(q);
      if (cache.h_factor) out.d_h_factor = Eigen::MatrixXd::Zero(q, q);
      return out;
    }
  }
  const Eigen::VectorXd sol = lu.solve(rhs);
  const Eigen::VectorXd d_u = sol.head(dim);
  const Eigen::VectorXd y = sol.tail(na);

  const Eigen::MatrixXd dH_full =
      0.5 * (d_u * cache.u.transpose() + cache.u * d_u.transpose());
  out.dH = dH_full.topLeftCorner(q, q);
  out.dF = d_u.head(q);
  out.d_f_ref = -2.0 * out.dF;

  for (Eigen::Index k = 0; k < na; ++k) {
    const int j = cache.row_input[static_cast<size_t>(active[static_cast<size_t>(k)])];
    if (j < 0) continue;  // bound rows carry no gradient entries
    if (!cache.rows[static_cast<size_t>(j)].trainable) continue;
    out.dh(j) = -y(k);
  }
  for (size_t j = 0; j < cache.rows.size(); ++j) {
    const auto& row = cache.rows[j];
    for (Eigen::Index i = 0; i < row.dh_dp.size(); ++i)
      out.d_penalties(static_cast<Eigen::Index>(j), i) =
          out.dh(static_cast<Eigen::Index>(j)) * row.dh_dp(i);
  }
  if (cache.h_factor) {
    // H = L L^T + ridge I, dl/dL = (dH + dH^T) L on the lower triangle
    const Eigen::MatrixXd full = 2.0 * out.dH * (*cache.h_factor);
    out.d_h_factor =
        full.triangularView<Eigen::Lower>().toDenseMatrix();
  }
  return out;
}

namespace {

struct ProbeResult {
  bool optimal = false;
  double loss = 0.0;
  std::vector<bool> active;
};

ProbeResult probe(const GradCheckCase& c, const Eigen::VectorXd& f_ref,
                  const std::vector<Eigen::VectorXd>& penalties,
                  const Eigen::VectorXd& h_offsets,
                  const std::optional<Eigen::MatrixXd>& h_factor) {
  BarrierLayerInput input;
  input.f_ref = f_ref;
  input.lb = c.lb;
  input.ub = c.ub;
  input.h_factor = h_factor;
  for (size_t i = 0; i < c.constraints.size(); ++i) {
    const auto& gc = c.constraints[i];
    HocbfRow row = assemble_row(gc.point, gc.rel_degree, gc.alphas, penalties[i]);
    row.h += h_offsets(static_cast<Eigen::Index>(i));
    row.constraint_index = static_cast<int>(i);
    input.rows.push_back(std::move(row));
  }
  auto [u, cache] = layer_forward(input);
  ProbeResult r;
  if (cache.status != SolveStatus::optimal) return r;
  r.optimal = true;
  r.loss = c.dl_du.dot(u);
  r.active.resize(static_cast<size_t>(cache.h.size()));
  for (Eigen::Index i = 0; i < cache.h.size(); ++i)
    r.active[static_cast<size_t>(i)] = cache.lambda(i) > kDualActiveTol;
  return r;
}

}  // namespace

GradCheckReport grad_check(const GradCheckCase& c, double fd_step) {
  GradCheckReport rep;

  std::vector<Eigen::VectorXd> penalties;
  for (const auto& gc : c.constraints) penalties.push_back(gc.penalties);
  Eigen::VectorXd offsets =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.constraints.size()));

  BarrierLayerInput input;
  input.f_ref = c.f_ref;
  input.lb = c.lb;
  input.ub = c.ub;
  input.h_factor = c.h_factor;
  for (size_t i = 0; i < c.constraints.size(); ++i) {
    const auto& gc = c.constraints[i];
    HocbfRow row = assemble_row(gc.point, gc.rel_degree, gc.alphas, gc.penalties);
    row.constraint_index = static_cast<int>(i);
    input.rows.push_back(std::move(row));
  }
  auto [u, cache] = layer_forward(input);
  if (cache.status != SolveStatus::optimal) return rep;
  rep.solved = true;
  const LayerGradients grads = layer_backward(cache, c.dl_du);
  if (grads.degenerate) {
    rep.skipped = true;
    return rep;
  }

  const ProbeResult base = probe(c, c.f_ref, penalties, offsets, c.h_factor);
  auto central = [&](auto&& modify) -> std::optional<double> {
    double lo = 0.0, hi = 0.0;
    for (int side = 0; side < 2; ++side) {
      const double delta = side == 0 ? fd_step : -fd_step;
      Eigen::VectorXd f = c.f_ref;
      auto pen = penalties;
      Eigen::VectorXd off = offsets;
      std::optional<Eigen::MatrixXd> L = c.h_factor;
      modify(delta, f, pen, off, L);
      const ProbeResult pr = probe(c, f, pen, off, L);
      if (!pr.optimal || pr.active != base.active) return std::nullopt;
      (side == 0 ? hi : lo) = pr.loss;
    }
    return (hi - lo) / (2.0 * fd_step);
  };

  auto record = [&](double analytic, std::optional<double> fd) {
    if (!fd) {
      rep.skipped = true;
      return;
    }
    const double denom = std::max(std::abs(analytic), std::abs(*fd));
    const double err =
        denom < 1e-6 ? std::abs(analytic - *fd) : std::abs(analytic - *fd) / denom;
    rep.max_err = std::max(rep.max_err, err);
    ++rep.params_checked;
  };

  for (Eigen::Index j = 0; j < c.f_ref.size() && !rep.skipped; ++j) {
    record(grads.d_f_ref(j), central([&](double d, Eigen::VectorXd& f, auto&, auto&, auto&) {
             f(j) += d;
           }));
  }
  for (size_t i = 0; i < c.constraints.size() && !rep.skipped; ++i) {
    for (Eigen::Index k = 0; k < c.constraints[i].penalties.size() && !rep.skipped; ++k) {
      record(grads.d_penalties(static_cast<Eigen::Index>(i), k),
             central([&](double d, auto&, std::vector<Eigen::VectorXd>& pen, auto&, auto&) {
               pen[i](k) += d;
             }));
    }
    record(grads.dh(static_cast<Eigen::Index>(i)),
           central([&](double d, auto&, auto&, Eigen::VectorXd& off, auto&) {
             off(static_cast<Eigen::Index>(i)) += d;
           }));
  }
  if (c.h_factor && !rep.skipped) {
    for (Eigen::Index i = 0; i < c.h_factor->rows() && !rep.skipped; ++i) {
      for (Eigen::Index j = 0; j <= i && !rep.skipped; ++j) {
        record((*grads.d_h_factor)(i, j),
               central([&](double d, auto&, auto&, auto&, std::optional<Eigen::MatrixXd>& L) {
                 (*L)(i, j) += d;
               }));
      }
    }
  }
  return rep;
}

namespace {

GradCheckCase random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  std::uniform_int_distribution<int> qdist(1, 3);
  std::uniform_int_distribution<int> rdist(1, 4);
  std::uniform_int_distribution<int> mdist(1, 2);

  GradCheckCase c;
  const int q = qdist(rng);
  const int r = rdist(rng);
  c.f_ref = Eigen::VectorXd::NullaryExpr(q, [&] { return 2.0 * unit(rng); });
  c.dl_du = Eigen::VectorXd::NullaryExpr(q, [&] { return unit(rng); });
  if (c.dl_du.cwiseAbs().maxCoeff() < 0.1) c.dl_du(0) = 1.0;

  for (int i = 0; i < r; ++i) {
    GradCheckConstraint gc;
    gc.rel_degree = mdist(rng);
    gc.point.b = 0.2 + 2.8 * frac(rng);
    gc.point.lf_b = 2.0 * unit(rng);
    gc.point.lf2_b = 2.0 * unit(rng);
    gc.point.lglf_b = Eigen::VectorXd::NullaryExpr(q, [&] { return 2.0 * unit(rng); });
    if (gc.point.lglf_b.cwiseAbs().maxCoeff() < 0.3) gc.point.lglf_b(0) = 1.0;
    for (int k = 0; k < gc.rel_degree; ++k) {
      ClassK a;
      if (frac(rng) < 0.1) {
        a.kind = ClassK::Kind::odd_power;
        a.power = 3;
      }
      a.gain = 0.5 + 1.5 * frac(rng);
      gc.alphas.push_back(a);
    }
    gc.penalties = Eigen::VectorXd::NullaryExpr(
        gc.rel_degree, [&] { return 0.3 + 2.7 * frac(rng); });
    c.constraints.push_back(std::move(gc));
  }

  c.lb.resize(q);
  c.ub.resize(q);
  for (int j = 0; j < q; ++j) {
    c.lb(j) = frac(rng) < 0.5 ? -(1.5 + 2.0 * frac(rng)) : -kInf;
    c.ub(j) = frac(rng) < 0.5 ? (1.5 + 2.0 * frac(rng)) : kInf;
  }
  if (frac(rng) < 0.3) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < i; ++j) L(i, j) = 0.5 * unit(rng);
      L(i, i) = 0.6 + frac(rng);
    }
    c.h_factor = L;
  }
  return c;
}

// Clear margin on every row: either firmly active or firmly slack, so the
// 1e-5 finite-difference step cannot flip the active set.
bool away_from_boundary(const GradCheckCase& c) {
  BarrierLayerInput input;
  input.f_ref = c.f_ref;
  input.lb = c.lb;
  input.ub = c.ub;
  input.h_factor = c.h_factor;
  for (const auto& gc : c.constraints)
    input.rows.push_back(assemble_row(gc.point, gc.rel_degree, gc.alphas, gc.penalties));
  auto [u, cache] = layer_forward(input);
  if (cache.status != SolveStatus::optimal) return false;
  for (Eigen::Index i = 0; i < cache.h.size(); ++i) {
    const double slack = cache.h(i) - cache.G.row(i).dot(cache.u);
    const bool active = cache.lambda(i) > 1e-4;
    if (!active && slack < 1e-3) return false;
    if (active && cache.lambda(i) < 1e-3) return false;
  }
  return true;
}

}  // namespace

GradCheckSummary run_gradcheck(int count, uint64_t seed, double tol) {
  GradCheckSummary s;
  std::mt19937_64 rng(seed);
  int attempts = 0;
  const int max_attempts = 60 * std::max(count, 1);
  while (s.evaluated < count && attempts < max_attempts) {
    ++attempts;
    const GradCheckCase c = random_case(rng);
    if (!away_from_boundary(c)) continue;
    const GradCheckReport rep = grad_check(c);
    if (!rep.solved || rep.skipped) {
      ++s.skipped;
      continue;
    }
    ++s.evaluated;
    s.max_err = std::max(s.max_err, rep.max_err);
    if (rep.max_err <= tol)
      ++s.passed;
    else
      ++s.failed;
  }
  return s;
}

}  // namespace barriernet
