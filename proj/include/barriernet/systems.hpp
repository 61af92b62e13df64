#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "barriernet/cbf.hpp"

namespace barriernet {

/// Control-affine dynamics xdot = f(x) + g(x) u with box control bounds.
struct AffineSystem {
  int state_dim = 0;
  int control_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;
};

/// One RK4 step under zero-order-hold control. Controls outside the box are
/// clamped and the clamp is reported through the optional counter.
Eigen::VectorXd step(const AffineSystem& system, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, double dt,
                     int* clamp_count = nullptr);

enum class ScenarioKind { merging, nav2d, nav3d };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

/// Scripted preceding-vehicle behaviour (merging): constant speed with an
/// optional position-triggered constant-deceleration segment.
struct LeadProfile {
  double brake_decel = 0.0;  // m/s^2, 0 disables the segment
  double brake_at = 0.0;     // lead position where braking starts
  double brake_until_speed = 0.0;
};

/// Fixed-parameter expert used to label training data.
struct ExpertConfig {
  Eigen::VectorXd penalties = Eigen::VectorXd::Ones(1);
  // nav2d reference law
  double heading_gain = 2.0;
  double speed_gain = 1.0;
  double cruise_speed = 5.0;
  double slow_radius = 6.0;
  // nav3d reference law
  double pos_gain = 0.4;
  double damp_gain = 1.1;
  // merging reference law
  double target_speed = 13.0;
  double accel_gain = 0.8;
  int sample_stride = 1;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::nav2d;
  double dt = 0.02;
  int horizon = 2000;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;

  Eigen::VectorXd obstacle_center;
  double obstacle_radius = 6.0;

  double phi = 1.8;
  double delta = 0.0;
  double zone_length = 150.0;
  std::array<double, 2> ego_speed_range{8.0, 14.0};
  std::array<double, 2> lead_speed_range{9.0, 14.0};
  std::array<double, 2> gap_range{22.0, 45.0};
  LeadProfile lead_train;
  LeadProfile lead_eval;

  Eigen::VectorXd destination;
  double destination_tolerance = 0.5;
  Eigen::VectorXd start_low;
  Eigen::VectorXd start_high;
  std::array<double, 2> goal_radius_range{70.0, 85.0};
  double goal_angle_deg = 12.0;
  double safe_start_margin = 1.0;

  ExpertConfig expert;
  std::vector<int> hidden_widths{128, 128};
  double penalty_cap = 10.0;
};

/// Everything a rollout needs: dynamics, safety constraints, the observation
/// map and the expert's nominal reference.
struct Scenario {
  ScenarioConfig config;
  AffineSystem system;
  std::vector<HocbfConstraint> constraints;
  /// x, goal -> network input z
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> observe;
  /// x, z -> nominal reference control
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> expert_reference;
  /// x, goal -> episode finished
  std::function<bool(const Eigen::VectorXd&, const Eigen::VectorXd&)> done;
  int obs_dim = 0;
  /// orders m_j of the constraints, flattened penalty count
  int penalty_dim = 0;
};

/// The eval flag switches the merging lead to its evaluation profile.
Scenario make_scenario(const ScenarioConfig& config, bool eval_profile = false);

struct Episode {
  Eigen::VectorXd x0;
  Eigen::VectorXd goal;  // empty for merging
};

/// Uniform draw from the configured boxes, rejection-sampled so the start lies
/// in the safe-set intersection of every constraint under the expert penalties.
Episode sample_episode(const Scenario& scenario, std::mt19937_64& rng);

struct ControlOutput {
  Eigen::VectorXd u;
  bool feasible = true;
  bool relaxed = false;
  double solve_us = 0.0;
};

using Controller =
    std::function<ControlOutput(const Eigen::VectorXd& x, const Eigen::VectorXd& z)>;

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;        // N + 1 entries
  std::vector<Eigen::VectorXd> observations;  // N + 1
  std::vector<Eigen::VectorXd> controls;      // N
  std::vector<Eigen::VectorXd> b_values;      // N + 1, one entry per constraint
  std::vector<uint8_t> relaxed;               // N
  std::vector<uint8_t> infeasible;            // N
  std::vector<double> solve_us;               // N
  Eigen::VectorXd goal;
  bool aborted = false;
  std::string abort_reason;
  bool reached_goal = false;
  int clamp_count = 0;

  int steps() const { return static_cast<int>(controls.size()); }
  double min_b() const;
  int infeasible_steps() const;
  int relaxed_steps() const;
};

Trajectory rollout(const Scenario& scenario, const Controller& controller,
                   const Episode& episode);

}  // namespace barriernet
