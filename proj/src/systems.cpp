#include "barriernet/systems.hpp"

#include <cmath>
#include <stdexcept>

#include "barriernet/io.hpp"

namespace barriernet {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

Eigen::VectorXd xdot(const AffineSystem& sys, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u) {
  return sys.f(x) + sys.g(x) * u;
}

}  // namespace

Eigen::VectorXd step(const AffineSystem& system, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, double dt, int* clamp_count) {
  Eigen::VectorXd uc = u.cwiseMax(system.u_min).cwiseMin(system.u_max);
  if ((uc - u).cwiseAbs().maxCoeff() > 0.0 && clamp_count) ++(*clamp_count);
  const Eigen::VectorXd k1 = xdot(system, x, uc);
  const Eigen::VectorXd k2 = xdot(system, x + 0.5 * dt * k1, uc);
  const Eigen::VectorXd k3 = xdot(system, x + 0.5 * dt * k2, uc);
  const Eigen::VectorXd k4 = xdot(system, x + dt * k3, uc);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::merging: return "merging";
    case ScenarioKind::nav2d: return "nav2d";
    case ScenarioKind::nav3d: return "nav3d";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "merging") return ScenarioKind::merging;
  if (name == "nav2d") return ScenarioKind::nav2d;
  if (name == "nav3d") return ScenarioKind::nav3d;
  throw std::invalid_argument("unknown scenario: " + name);
}

namespace {

// State and observation share one layout: (x_lead, v_lead, x_ego, v_ego).
Scenario make_merging(const ScenarioConfig& cfg, bool eval_profile) {
  Scenario s;
  s.config = cfg;
  const LeadProfile lead = eval_profile ? cfg.lead_eval : cfg.lead_train;

  s.system.state_dim = 4;
  s.system.control_dim = 1;
  s.system.u_min = cfg.u_min;
  s.system.u_max = cfg.u_max;
  s.system.f = [lead](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(4);
    double a_lead = 0.0;
    if (lead.brake_decel > 0.0 && x(0) >= lead.brake_at &&
        x(1) > lead.brake_until_speed)
      a_lead = -lead.brake_decel;
    dx << x(1), a_lead, x(3), 0.0;
    return dx;
  };
  s.system.g = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 1);
    g(3, 0) = 1.0;
    return g;
  };

  HocbfConstraint c;
  c.name = "rear_end";
  c.rel_degree = 1;
  c.alphas = {ClassK{}};
  const double phi = cfg.phi;
  const double delta = cfg.delta;
  c.b = [phi, delta](const Eigen::VectorXd& x) {
    return (x(0) - x(2)) - phi * x(3) - delta;
  };
  // bdot = v_lead - v_ego - phi u
  c.lf_b = [](const Eigen::VectorXd& x) { return x(1) - x(3); };
  c.lglf_b = [phi](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, -phi);
  };
  s.constraints = {c};
  s.penalty_dim = 1;

  s.observe = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  s.obs_dim = 4;

  const ExpertConfig ex = cfg.expert;
  s.expert_reference = [ex](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, ex.accel_gain * (ex.target_speed - x(3)));
  };
  const double zone = cfg.zone_length;
  s.done = [zone](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return x(2) >= zone;
  };
  return s;
}

Scenario make_nav2d(const ScenarioConfig& cfg) {
  Scenario s;
  s.config = cfg;
  s.system.state_dim = 4;
  s.system.control_dim = 2;
  s.system.u_min = cfg.u_min;
  s.system.u_max = cfg.u_max;
  s.system.f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(4);
    dx << x(3) * std::cos(x(2)), x(3) * std::sin(x(2)), 0.0, 0.0;
    return dx;
  };
  s.system.g = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 2);
    g(2, 0) = 1.0;
    g(3, 1) = 1.0;
    return g;
  };

  HocbfConstraint c;
  c.name = "disk_obstacle";
  c.rel_degree = 2;
  c.alphas = {ClassK{}, ClassK{}};
  const double xo = cfg.obstacle_center(0);
  const double yo = cfg.obstacle_center(1);
  const double r2 = cfg.obstacle_radius * cfg.obstacle_radius;
  c.b = [xo, yo, r2](const Eigen::VectorXd& x) {
    const double dx = x(0) - xo, dy = x(1) - yo;
    return dx * dx + dy * dy - r2;
  };
  c.lf_b = [xo, yo](const Eigen::VectorXd& x) {
    return 2.0 * (x(0) - xo) * x(3) * std::cos(x(2)) +
           2.0 * (x(1) - yo) * x(3) * std::sin(x(2));
  };
  c.lf2_b = [](const Eigen::VectorXd& x) { return 2.0 * x(3) * x(3); };
  c.lglf_b = [xo, yo](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(2);
    v << -2.0 * (x(0) - xo) * x(3) * std::sin(x(2)) +
             2.0 * (x(1) - yo) * x(3) * std::cos(x(2)),
        2.0 * (x(0) - xo) * std::cos(x(2)) + 2.0 * (x(1) - yo) * std::sin(x(2));
    return v;
  };
  s.constraints = {c};
  s.penalty_dim = 2;

  s.observe = [](const Eigen::VectorXd& x, const Eigen::VectorXd& goal) {
    Eigen::VectorXd z(6);
    z << x, goal;
    return z;
  };
  s.obs_dim = 6;

  const ExpertConfig ex = cfg.expert;
  s.expert_reference = [ex](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const double gx = z(4), gy = z(5);
    const double dx = gx - x(0), dy = gy - x(1);
    const double dist = std::hypot(dx, dy);
    const double heading = std::atan2(dy, dx);
    const double v_des =
        ex.cruise_speed * std::min(1.0, dist / std::max(ex.slow_radius, 1e-6));
    Eigen::VectorXd u(2);
    u << ex.heading_gain * wrap_angle(heading - x(2)),
        ex.speed_gain * (v_des - x(3));
    return u;
  };
  const double tol = cfg.destination_tolerance;
  s.done = [tol](const Eigen::VectorXd& x, const Eigen::VectorXd& goal) {
    return std::hypot(x(0) - goal(0), x(1) - goal(1)) <= tol;
  };
  return s;
}

Scenario make_nav3d(const ScenarioConfig& cfg) {
  Scenario s;
  s.config = cfg;
  s.system.state_dim = 6;
  s.system.control_dim = 3;
  s.system.u_min = cfg.u_min;
  s.system.u_max = cfg.u_max;
  // state (p_x, v_x, p_y, v_y, p_z, v_z)
  s.system.f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(6);
    dx << x(1), 0.0, x(3), 0.0, x(5), 0.0;
    return dx;
  };
  s.system.g = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 3);
    g(1, 0) = 1.0;
    g(3, 1) = 1.0;
    g(5, 2) = 1.0;
    return g;
  };

  HocbfConstraint c;
  c.name = "superquadric_obstacle";
  c.rel_degree = 2;
  c.alphas = {ClassK{}, ClassK{}};
  const Eigen::Vector3d o = cfg.obstacle_center.head(3);
  const double r4 = std::pow(cfg.obstacle_radius, 4);
  auto pos = [](const Eigen::VectorXd& x) {
    return Eigen::Vector3d(x(0), x(2), x(4));
  };
  auto vel = [](const Eigen::VectorXd& x) {
    return Eigen::Vector3d(x(1), x(3), x(5));
  };
  c.b = [o, r4, pos](const Eigen::VectorXd& x) {
    return (pos(x) - o).array().pow(4).sum() - r4;
  };
  c.lf_b = [o, pos, vel](const Eigen::VectorXd& x) {
    const Eigen::Array3d d = (pos(x) - o).array();
    return (4.0 * d.pow(3) * vel(x).array()).sum();
  };
  c.lf2_b = [o, pos, vel](const Eigen::VectorXd& x) {
    const Eigen::Array3d d = (pos(x) - o).array();
    return (12.0 * d.pow(2) * vel(x).array().square()).sum();
  };
  c.lglf_b = [o, pos](const Eigen::VectorXd& x) {
    const Eigen::Array3d d = (pos(x) - o).array();
    return Eigen::VectorXd(4.0 * d.pow(3).matrix());
  };
  s.constraints = {c};
  s.penalty_dim = 2;

  s.observe = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  s.obs_dim = 6;

  const ExpertConfig ex = cfg.expert;
  const Eigen::Vector3d dest = cfg.destination.head(3);
  s.expert_reference = [ex, dest, pos, vel](const Eigen::VectorXd& x,
                                            const Eigen::VectorXd&) {
    return Eigen::VectorXd(ex.pos_gain * (dest - pos(x)) - ex.damp_gain * vel(x));
  };
  const double tol = cfg.destination_tolerance;
  s.done = [tol, dest, pos](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return (pos(x) - dest).norm() <= tol;
  };
  return s;
}

}  // namespace

Scenario make_scenario(const ScenarioConfig& config, bool eval_profile) {
  switch (config.kind) {
    case ScenarioKind::merging: return make_merging(config, eval_profile);
    case ScenarioKind::nav2d: return make_nav2d(config);
    case ScenarioKind::nav3d: return make_nav3d(config);
  }
  throw std::invalid_argument("make_scenario: unknown scenario kind");
}

Episode sample_episode(const Scenario& scenario, std::mt19937_64& rng) {
  const ScenarioConfig& cfg = scenario.config;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in_range = [&](const std::array<double, 2>& r) {
    return r[0] + unit(rng) * (r[1] - r[0]);
  };

  for (int attempt = 0; attempt < 10000; ++attempt) {
    Episode ep;
    if (cfg.kind == ScenarioKind::merging) {
      ep.x0.resize(4);
      const double gap = in_range(cfg.gap_range);
      ep.x0 << gap, in_range(cfg.lead_speed_range), 0.0,
          in_range(cfg.ego_speed_range);
      ep.goal.resize(0);
    } else {
      const Eigen::Index n = cfg.start_low.size();
      ep.x0.resize(n);
      for (Eigen::Index i = 0; i < n; ++i)
        ep.x0(i) = cfg.start_low(i) + unit(rng) * (cfg.start_high(i) - cfg.start_low(i));
      if (cfg.kind == ScenarioKind::nav2d) {
        const double base = std::atan2(cfg.obstacle_center(1) - ep.x0(1),
                                       cfg.obstacle_center(0) - ep.x0(0));
        const double spread = cfg.goal_angle_deg * M_PI / 180.0;
        const double angle = base + (2.0 * unit(rng) - 1.0) * spread;
        const double radius = in_range(cfg.goal_radius_range);
        ep.goal.resize(2);
        ep.goal << ep.x0(0) + radius * std::cos(angle),
            ep.x0(1) + radius * std::sin(angle);
        const double goal_clear = std::hypot(ep.goal(0) - cfg.obstacle_center(0),
                                             ep.goal(1) - cfg.obstacle_center(1));
        if (goal_clear < cfg.obstacle_radius + 2.0) continue;
      } else {
        ep.goal = cfg.destination;
      }
    }

    // Start must lie in the safe-set intersection under the expert penalties.
    bool safe = true;
    for (const auto& c : scenario.constraints) {
      if (c.b(ep.x0) < cfg.safe_start_margin) {
        safe = false;
        break;
      }
      if (c.rel_degree == 2) {
        const Eigen::VectorXd psi = psi_eval(c, ep.x0, cfg.expert.penalties);
        if (psi(1) < 0.0) {
          safe = false;
          break;
        }
      }
    }
    if (safe) return ep;
  }
  throw std::runtime_error("sample_episode: no safe start found in 10000 draws");
}

Trajectory rollout(const Scenario& scenario, const Controller& controller,
                   const Episode& episode) {
  const ScenarioConfig& cfg = scenario.config;
  Trajectory traj;
  traj.goal = episode.goal;

  Eigen::VectorXd x = episode.x0;
  auto record_state = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.observations.push_back(scenario.observe(x, episode.goal));
    Eigen::VectorXd b(scenario.constraints.size());
    for (size_t j = 0; j < scenario.constraints.size(); ++j)
      b(static_cast<Eigen::Index>(j)) = scenario.constraints[j].b(x);
    traj.b_values.push_back(b);
  };

  record_state(0.0);
  for (int k = 0; k < cfg.horizon; ++k) {
    if (scenario.done(x, episode.goal)) {
      traj.reached_goal = true;
      break;
    }
    const ControlOutput out = controller(x, traj.observations.back());
    if (!out.feasible) {
      traj.infeasible.push_back(1);
      traj.relaxed.push_back(0);
      traj.solve_us.push_back(out.solve_us);
      traj.controls.push_back(Eigen::VectorXd::Zero(scenario.system.control_dim));
      traj.aborted = true;
      traj.abort_reason = "infeasible step " + std::to_string(k);
      io::log_kv("infeasible_step",
                 {{"scenario", to_string(cfg.kind)}, {"step", std::to_string(k)}});
      // state after the failed step is not advanced
      traj.times.push_back(traj.times.back() + cfg.dt);
      traj.states.push_back(x);
      traj.observations.push_back(traj.observations.back());
      traj.b_values.push_back(traj.b_values.back());
      return traj;
    }
    Eigen::VectorXd next = step(scenario.system, x, out.u, cfg.dt, &traj.clamp_count);
    if (!next.allFinite()) {
      traj.aborted = true;
      traj.abort_reason = "non-finite state at step " + std::to_string(k);
      io::log_kv("rollout_abort",
                 {{"scenario", to_string(cfg.kind)}, {"step", std::to_string(k)}});
      return traj;
    }
    traj.controls.push_back(out.u.cwiseMax(scenario.system.u_min).cwiseMin(scenario.system.u_max));
    traj.relaxed.push_back(out.relaxed ? 1 : 0);
    traj.infeasible.push_back(0);
    traj.solve_us.push_back(out.solve_us);
    if (out.relaxed)
      io::log_kv("relaxed_step",
                 {{"scenario", to_string(cfg.kind)}, {"step", std::to_string(k)}});
    x = next;
    record_state(cfg.dt * (k + 1));
  }
  if (!traj.reached_goal && scenario.done(x, episode.goal)) traj.reached_goal = true;
  if (traj.clamp_count > 0)
    io::log_kv("clamped_controls", {{"scenario", to_string(cfg.kind)},
                                    {"steps", std::to_string(traj.clamp_count)}});
  return traj;
}

double Trajectory::min_b() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : b_values) m = std::min(m, b.minCoeff());
  return m;
}

int Trajectory::infeasible_steps() const {
  int n = 0;
  for (uint8_t v : infeasible) n += v;
  return n;
}

int Trajectory::relaxed_steps() const {
  int n = 0;
  for (uint8_t v : relaxed) n += v;
  return n;
}

}  // namespace barriernet
