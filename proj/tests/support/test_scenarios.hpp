#pragma once

// In-code scenario configurations shared by the unit tests, matching the
// worked examples (unicycle obstacle at (5,0) with R = 1, 3-D superquadric at
// (5,0,0) with R = 2, merging with phi = 1.8 and delta = 0).

#include "barriernet/systems.hpp"

namespace barriernet::testing {

inline ScenarioConfig merging_config() {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::merging;
  cfg.dt = 0.1;
  cfg.horizon = 400;
  cfg.u_min = Eigen::VectorXd::Constant(1, -5.0);
  cfg.u_max = Eigen::VectorXd::Constant(1, 5.0);
  cfg.phi = 1.8;
  cfg.delta = 0.0;
  cfg.zone_length = 150.0;
  cfg.expert.penalties = Eigen::VectorXd::Ones(1);
  cfg.expert.sample_stride = 2;
  cfg.hidden_widths = {16, 16};
  return cfg;
}

inline ScenarioConfig nav2d_config(double xo = 5.0, double yo = 0.0, double r = 1.0) {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::nav2d;
  cfg.dt = 0.02;
  cfg.horizon = 2400;
  cfg.u_min = (Eigen::VectorXd(2) << -2.0, -5.0).finished();
  cfg.u_max = (Eigen::VectorXd(2) << 2.0, 5.0).finished();
  cfg.obstacle_center = (Eigen::VectorXd(2) << xo, yo).finished();
  cfg.obstacle_radius = r;
  cfg.destination = (Eigen::VectorXd(2) << 60.0, 44.0).finished();
  cfg.start_low = (Eigen::VectorXd(4) << -12.0, 4.0, 0.2, 1.0).finished();
  cfg.start_high = (Eigen::VectorXd(4) << -8.0, 7.0, 0.8, 2.5).finished();
  cfg.expert.penalties = Eigen::VectorXd::Constant(2, 2.0);
  cfg.expert.cruise_speed = 5.0;
  cfg.expert.sample_stride = 5;
  cfg.hidden_widths = {16, 16};
  return cfg;
}

inline ScenarioConfig nav3d_config(double xo = 5.0, double yo = 0.0, double zo = 0.0,
                                   double r = 2.0) {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::nav3d;
  cfg.dt = 0.02;
  cfg.horizon = 1500;
  cfg.u_min = Eigen::VectorXd::Constant(3, -10.0);
  cfg.u_max = Eigen::VectorXd::Constant(3, 10.0);
  cfg.obstacle_center = (Eigen::VectorXd(3) << xo, yo, zo).finished();
  cfg.obstacle_radius = r;
  cfg.destination = (Eigen::VectorXd(3) << 24.0, 2.0, 1.0).finished();
  cfg.start_low = (Eigen::VectorXd(6) << -2.0, 1.0, -2.0, -0.3, -1.5, -0.3).finished();
  cfg.start_high = (Eigen::VectorXd(6) << 2.0, 2.5, 2.0, 0.3, 1.5, 0.3).finished();
  cfg.expert.penalties = Eigen::VectorXd::Constant(2, 1.5);
  cfg.expert.sample_stride = 5;
  cfg.hidden_widths = {16, 16};
  return cfg;
}

}  // namespace barriernet::testing
