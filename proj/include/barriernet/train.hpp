#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "barriernet/mlp.hpp"
#include "barriernet/systems.hpp"

namespace barriernet {

enum class ModelKind { barriernet, fc, dfb };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Sample {
  Eigen::VectorXd z;
  Eigen::VectorXd x;
  Eigen::VectorXd u_expert;
  double weight = 1.0;
  int traj_index = 0;
};

struct Dataset {
  std::string scenario;
  std::vector<Sample> samples;
  int num_trajectories = 0;
  std::vector<double> traj_min_b;
  std::vector<double> traj_weight;
  uint64_t seed = 0;
  int sample_stride = 1;
  Eigen::VectorXd expert_penalties;
};

/// Threshold below which a trajectory's samples are down-weighted (navigation
/// scenarios): min_t b < 0.05 R^2, following the boundary-sampling caveat.
double boundary_weight_threshold(const ScenarioConfig& config);

/// Rolls out the fixed-parameter expert `count` times; unsafe or infeasible
/// trajectories are discarded and regenerated.
Dataset generate_dataset(const Scenario& scenario, int count, uint64_t seed);

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const Scenario& scenario);
Dataset load_dataset(const std::filesystem::path& dir);

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  bool adam = true;  // adaptive-moment default; plain SGD otherwise
  int batch_size = 32;
  uint64_t seed = 7;
  double val_fraction = 0.1;
};

struct TrainResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

/// Minimizes the mean squared control error against the expert labels.
/// BarrierNet trains through the QP layer; the FC baseline trains the
/// reference head directly (a DFB is an FC net, filtered only at evaluation).
TrainResult train_model(ModelKind kind, Mlp& net, const Scenario& scenario,
                        const Dataset& dataset, const TrainConfig& config);

Mlp make_model(ModelKind kind, const Scenario& scenario, uint64_t seed);

/// The returned controllers hold references: net and scenario must outlive them.
Controller make_controller(ModelKind kind, const Mlp& net, const Scenario& scenario);
Controller make_expert_controller(const Scenario& scenario);

struct RolloutMetrics {
  double min_b = 0.0;
  double min_headway_ratio = 0.0;  // merging only: min_t z / v_k
  double mse_expert = 0.0;
  double mean_solve_us = 0.0;
  double dest_error = 0.0;
  int infeasible_steps = 0;
  int relaxed_steps = 0;
  bool reached = false;
};

struct EvalOptions {
  int rollouts = 50;
  uint64_t seed = 1;
  int threads = 1;
  bool eval_profile = true;  // merging: apply the braking lead profile
};

struct EvalReport {
  std::vector<RolloutMetrics> rollouts;
  double min_b = 0.0;
  double mean_mse = 0.0;
  double mean_solve_us = 0.0;
  double mean_dest_error = 0.0;
  int infeasible_steps = 0;
  int relaxed_steps = 0;
  int reached_count = 0;
  std::vector<Trajectory> trajectories;  // filled when keep_trajectories > 0
};

EvalReport evaluate(ModelKind kind, const Mlp& net, const ScenarioConfig& config,
                    const EvalOptions& options, int keep_trajectories = 0);

RolloutMetrics rollout_metrics(const Scenario& scenario, const Trajectory& traj,
                               const Controller& expert);

/// Worker cap: min(BARRIERNET_THREADS if set, hardware concurrency).
int worker_count();

}  // namespace barriernet
