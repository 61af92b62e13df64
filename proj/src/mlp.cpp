#include "barriernet/mlp.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "barriernet/io.hpp"

namespace barriernet {

namespace {

// Soft clamp keeps the logistic argument bounded so the penalty head can never
// saturate to exactly 0 or the cap, whatever the input magnitude.
constexpr double kPreactCap = 25.0;

double safe_logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double soft_clamp(double a) { return kPreactCap * std::tanh(a / kPreactCap); }

double soft_clamp_slope(double a) {
  const double t = std::tanh(a / kPreactCap);
  return 1.0 - t * t;
}

double penalty_value(double a, double cap) {
  return cap * safe_logistic(soft_clamp(a));
}

double penalty_slope(double a, double cap) {
  const double s = safe_logistic(soft_clamp(a));
  return cap * s * (1.0 - s) * soft_clamp_slope(a);
}

}  // namespace

Mlp Mlp::init(const MlpConfig& config) {
  Mlp net;
  net.config = config;
  std::mt19937_64 rng(config.seed);
  std::vector<int> dims;
  dims.push_back(config.input_dim);
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(config.ref_outputs + config.penalty_outputs);

  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const int fan_in = dims[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.W.resize(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = dist(rng);
    layer.b.resize(dims[l + 1]);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = dist(rng);
    net.layers.push_back(std::move(layer));
  }
  net.norm_mean = Eigen::VectorXd::Zero(config.input_dim);
  net.norm_std = Eigen::VectorXd::Ones(config.input_dim);
  return net;
}

void Mlp::set_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
  if (mean.size() != config.input_dim || std.size() != config.input_dim)
    throw std::invalid_argument("set_normalization: dimension mismatch");
  norm_mean = mean;
  norm_std = std.cwiseMax(1e-12);
}

MlpOutputs mlp_forward(const Mlp& net, const Eigen::VectorXd& z, MlpCache* cache) {
  if (z.size() != net.config.input_dim)
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  Eigen::VectorXd x =
      (z - net.norm_mean).cwiseQuotient(net.norm_std);
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const size_t n_layers = net.layers.size();
  for (size_t l = 0; l < n_layers; ++l) {
    if (cache) cache->inputs.push_back(x);
    Eigen::VectorXd pre = net.layers[l].W * x + net.layers[l].b;
    if (cache) cache->pre.push_back(pre);
    if (l + 1 < n_layers)
      x = pre.array().tanh().matrix();
    else
      x = std::move(pre);
  }
  MlpOutputs out;
  const int nr = net.config.ref_outputs;
  const int np = net.config.penalty_outputs;
  out.f_ref = x.head(nr);
  out.penalties.resize(np);
  for (int i = 0; i < np; ++i)
    out.penalties(i) = penalty_value(x(nr + i), net.config.penalty_cap);
  return out;
}

void MlpGradients::resize_like(const Mlp& net) {
  layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    layers[l].W.setZero(net.layers[l].W.rows(), net.layers[l].W.cols());
    layers[l].b.setZero(net.layers[l].b.size());
  }
}

void MlpGradients::set_zero() {
  for (auto& l : layers) {
    l.W.setZero();
    l.b.setZero();
  }
}

void MlpGradients::scale(double s) {
  for (auto& l : layers) {
    l.W *= s;
    l.b *= s;
  }
}

void mlp_backward(const Mlp& net, const MlpCache& cache,
                  const Eigen::VectorXd& dl_df, const Eigen::VectorXd& dl_dp,
                  MlpGradients& out) {
  const int nr = net.config.ref_outputs;
  const int np = net.config.penalty_outputs;
  if (dl_df.size() != nr || dl_dp.size() != np)
    throw std::invalid_argument("mlp_backward: head gradient dimension mismatch");
  if (out.layers.size() != net.layers.size()) out.resize_like(net);

  const size_t last = net.layers.size() - 1;
  Eigen::VectorXd d_pre(nr + np);
  d_pre.head(nr) = dl_df;
  for (int i = 0; i < np; ++i)
    d_pre(nr + i) =
        dl_dp(i) * penalty_slope(cache.pre[last](nr + i), net.config.penalty_cap);

  for (size_t l = net.layers.size(); l-- > 0;) {
    out.layers[l].W += d_pre * cache.inputs[l].transpose();
    out.layers[l].b += d_pre;
    if (l == 0) break;
    Eigen::VectorXd d_act = net.layers[l].W.transpose() * d_pre;
    const Eigen::ArrayXd t = cache.pre[l - 1].array().tanh();
    d_pre = (d_act.array() * (1.0 - t * t)).matrix();
  }
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  Eigen::Index i = 0;
  for (const auto& e : j) v(i++) = e.get<double>();
  return v;
}

}  // namespace

void save_checkpoint(const Mlp& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = 1;
  j["model_kind"] = meta.model_kind;
  j["scenario"] = meta.scenario;
  j["trained_epochs"] = meta.trained_epochs;
  j["seed"] = meta.seed;
  j["input_dim"] = net.config.input_dim;
  j["hidden"] = net.config.hidden;
  j["ref_outputs"] = net.config.ref_outputs;
  j["penalty_outputs"] = net.config.penalty_outputs;
  j["penalty_cap"] = net.config.penalty_cap;
  j["activation"] = "tanh";
  j["penalty_transform"] = "scaled_logistic";
  j["norm_mean"] = vector_to_json(net.norm_mean);
  j["norm_std"] = vector_to_json(net.norm_std);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers) {
    nlohmann::json lj;
    lj["rows"] = layer.W.rows();
    lj["cols"] = layer.W.cols();
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
      for (Eigen::Index k = 0; k < layer.W.cols(); ++k) w.push_back(layer.W(i, k));
    lj["W"] = std::move(w);
    lj["b"] = vector_to_json(layer.b);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);

  std::ofstream out(path);
  if (!out) throw io::ConfigError("cannot write checkpoint: " + path.string());
  out << j.dump(2) << '\n';
}

std::pair<Mlp, CheckpointMeta> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io::ConfigError("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io::ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", 0) != 1)
    throw io::ConfigError("unsupported checkpoint format in " + path.string());

  Mlp net;
  net.config.input_dim = j.at("input_dim").get<int>();
  net.config.hidden = j.at("hidden").get<std::vector<int>>();
  net.config.ref_outputs = j.at("ref_outputs").get<int>();
  net.config.penalty_outputs = j.at("penalty_outputs").get<int>();
  net.config.penalty_cap = j.at("penalty_cap").get<double>();
  net.config.seed = j.at("seed").get<uint64_t>();
  net.norm_mean = vector_from_json(j.at("norm_mean"));
  net.norm_std = vector_from_json(j.at("norm_std"));
  for (const auto& lj : j.at("layers")) {
    DenseLayer layer;
    const Eigen::Index rows = lj.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = lj.at("cols").get<Eigen::Index>();
    layer.W.resize(rows, cols);
    const auto& w = lj.at("W");
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index k = 0; k < cols; ++k) layer.W(i, k) = w.at(idx++).get<double>();
    layer.b = vector_from_json(lj.at("b"));
    net.layers.push_back(std::move(layer));
  }
  CheckpointMeta meta;
  meta.model_kind = j.at("model_kind").get<std::string>();
  meta.scenario = j.at("scenario").get<std::string>();
  meta.trained_epochs = j.at("trained_epochs").get<int>();
  meta.seed = j.at("seed").get<uint64_t>();
  return {std::move(net), std::move(meta)};
}

}  // namespace barriernet
