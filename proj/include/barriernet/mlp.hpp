#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace barriernet {

struct MlpConfig {
  int input_dim = 0;
  std::vector<int> hidden{128, 128};
  int ref_outputs = 0;      // identity head: the reference control f(z)
  int penalty_outputs = 0;  // positive head: the penalties p_i(z)
  double penalty_cap = 10.0;
  uint64_t seed = 7;
};

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

/// Fully connected net with tanh hidden layers, an identity reference head and
/// a scaled-logistic penalty head (strictly inside (0, penalty_cap)).
struct Mlp {
  MlpConfig config;
  std::vector<DenseLayer> layers;
  Eigen::VectorXd norm_mean;
  Eigen::VectorXd norm_std;

  static Mlp init(const MlpConfig& config);
  int output_dim() const { return config.ref_outputs + config.penalty_outputs; }
  void set_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);
};

struct MlpCache {
  std::vector<Eigen::VectorXd> inputs;  // input to each layer (normalized z first)
  std::vector<Eigen::VectorXd> pre;     // preactivations
};

struct MlpOutputs {
  Eigen::VectorXd f_ref;
  Eigen::VectorXd penalties;
};

MlpOutputs mlp_forward(const Mlp& net, const Eigen::VectorXd& z,
                       MlpCache* cache = nullptr);

struct MlpGradients {
  std::vector<DenseLayer> layers;

  void resize_like(const Mlp& net);
  void set_zero();
  void scale(double s);
};

/// Exact backprop through the cached forward pass; accumulates into out.
void mlp_backward(const Mlp& net, const MlpCache& cache,
                  const Eigen::VectorXd& dl_df, const Eigen::VectorXd& dl_dp,
                  MlpGradients& out);

struct CheckpointMeta {
  std::string model_kind = "barriernet";
  std::string scenario;
  int trained_epochs = 0;
  uint64_t seed = 7;
};

void save_checkpoint(const Mlp& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
std::pair<Mlp, CheckpointMeta> load_checkpoint(const std::filesystem::path& path);

}  // namespace barriernet
