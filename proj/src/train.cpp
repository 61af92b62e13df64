#include "barriernet/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "barriernet/barrier_layer.hpp"
#include "barriernet/io.hpp"

namespace barriernet {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::barriernet: return "barriernet";
    case ModelKind::fc: return "fc";
    case ModelKind::dfb: return "dfb";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "barriernet") return ModelKind::barriernet;
  if (name == "fc") return ModelKind::fc;
  if (name == "dfb") return ModelKind::dfb;
  throw std::invalid_argument("unknown model kind: " + name);
}

double boundary_weight_threshold(const ScenarioConfig& config) {
  if (config.kind == ScenarioKind::merging) return 0.0;
  return 0.05 * config.obstacle_radius * config.obstacle_radius;
}

namespace {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void shuffle_indices(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<size_t> dist(0, i - 1);
    std::swap(v[i - 1], v[dist(rng)]);
  }
}

std::vector<HocbfRow> assemble_rows(const Scenario& scenario,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& penalties) {
  std::vector<HocbfRow> rows;
  Eigen::Index offset = 0;
  for (size_t j = 0; j < scenario.constraints.size(); ++j) {
    const auto& c = scenario.constraints[j];
    HocbfRow row = assemble_row(c, x, penalties.segment(offset, c.rel_degree));
    row.constraint_index = static_cast<int>(j);
    rows.push_back(std::move(row));
    offset += c.rel_degree;
  }
  return rows;
}

ControlOutput qp_control(const Scenario& scenario, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& f_ref,
                         const Eigen::VectorXd& penalties, bool allow_relaxation,
                         ForwardCache* cache_out = nullptr) {
  BarrierLayerInput input;
  input.f_ref = f_ref;
  input.rows = assemble_rows(scenario, x, penalties);
  input.lb = scenario.system.u_min;
  input.ub = scenario.system.u_max;
  input.allow_relaxation = allow_relaxation;
  auto [u, cache] = layer_forward(input);
  ControlOutput out;
  out.u = u;
  out.feasible = cache.status == SolveStatus::optimal;
  out.relaxed = cache.relaxed;
  out.solve_us = cache.solve_us;
  if (cache_out) *cache_out = std::move(cache);
  return out;
}

}  // namespace

Controller make_expert_controller(const Scenario& scenario) {
  const Eigen::VectorXd penalties = scenario.config.expert.penalties;
  if (penalties.size() != scenario.penalty_dim)
    throw std::invalid_argument("expert penalties size mismatch");
  return [&scenario, penalties](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    return qp_control(scenario, x, scenario.expert_reference(x, z), penalties,
                      /*allow_relaxation=*/false);
  };
}

Controller make_controller(ModelKind kind, const Mlp& net, const Scenario& scenario) {
  switch (kind) {
    case ModelKind::barriernet:
      return [&net, &scenario](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        const auto t0 = std::chrono::steady_clock::now();
        const MlpOutputs out = mlp_forward(net, z);
        ControlOutput c = qp_control(scenario, x, out.f_ref, out.penalties,
                                     /*allow_relaxation=*/false);
        const auto t1 = std::chrono::steady_clock::now();
        c.solve_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        return c;
      };
    case ModelKind::fc:
      return [&net](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        const auto t0 = std::chrono::steady_clock::now();
        ControlOutput c;
        c.u = mlp_forward(net, z).f_ref;
        const auto t1 = std::chrono::steady_clock::now();
        c.solve_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        return c;
      };
    case ModelKind::dfb: {
      // FC output passed through a fixed HOCBF-QP filter with unit penalties.
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(scenario.penalty_dim);
      return [&net, &scenario, ones](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        const auto t0 = std::chrono::steady_clock::now();
        const MlpOutputs out = mlp_forward(net, z);
        ControlOutput c = qp_control(scenario, x, out.f_ref, ones,
                                     /*allow_relaxation=*/false);
        const auto t1 = std::chrono::steady_clock::now();
        c.solve_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        return c;
      };
    }
  }
  throw std::invalid_argument("make_controller: unknown model kind");
}

Mlp make_model(ModelKind kind, const Scenario& scenario, uint64_t seed) {
  MlpConfig cfg;
  cfg.input_dim = scenario.obs_dim;
  cfg.hidden = scenario.config.hidden_widths;
  cfg.ref_outputs = scenario.system.control_dim;
  cfg.penalty_outputs = kind == ModelKind::barriernet ? scenario.penalty_dim : 0;
  cfg.penalty_cap = scenario.config.penalty_cap;
  cfg.seed = seed;
  return Mlp::init(cfg);
}

Dataset generate_dataset(const Scenario& scenario, int count, uint64_t seed) {
  Dataset ds;
  ds.scenario = to_string(scenario.config.kind);
  ds.seed = seed;
  ds.sample_stride = std::max(1, scenario.config.expert.sample_stride);
  ds.expert_penalties = scenario.config.expert.penalties;

  const Controller expert = make_expert_controller(scenario);
  std::mt19937_64 rng(seed);
  const double weight_threshold = boundary_weight_threshold(scenario.config);
  const double safety_floor = -1e-3;

  int attempts = 0;
  const int max_attempts = std::max(20, 10 * count);
  while (ds.num_trajectories < count && attempts < max_attempts) {
    ++attempts;
    const Episode ep = sample_episode(scenario, rng);
    const Trajectory traj = rollout(scenario, expert, ep);
    if (traj.aborted || traj.infeasible_steps() > 0 || traj.min_b() < safety_floor) {
      io::log_kv("trajectory_discarded",
                 {{"scenario", ds.scenario},
                  {"min_b", io::format_double(traj.min_b())},
                  {"aborted", traj.aborted ? "1" : "0"}});
      continue;
    }
    const double weight =
        (scenario.config.kind != ScenarioKind::merging &&
         traj.min_b() < weight_threshold)
            ? 0.5
            : 1.0;
    for (int k = 0; k < traj.steps(); k += ds.sample_stride) {
      Sample s;
      s.z = traj.observations[static_cast<size_t>(k)];
      s.x = traj.states[static_cast<size_t>(k)];
      s.u_expert = traj.controls[static_cast<size_t>(k)];
      s.weight = weight;
      s.traj_index = ds.num_trajectories;
      ds.samples.push_back(std::move(s));
    }
    ds.traj_min_b.push_back(traj.min_b());
    ds.traj_weight.push_back(weight);
    ++ds.num_trajectories;
  }
  if (ds.num_trajectories < count)
    throw std::runtime_error("generate_dataset: expert kept failing; got " +
                             std::to_string(ds.num_trajectories) + "/" +
                             std::to_string(count));
  return ds;
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  int t = 0;

  void init(const Mlp& net) {
    m.resize(net.layers.size());
    v.resize(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
      m[l].W.setZero(net.layers[l].W.rows(), net.layers[l].W.cols());
      m[l].b.setZero(net.layers[l].b.size());
      v[l] = m[l];
    }
  }
};

void apply_update(Mlp& net, const MlpGradients& grads, const TrainConfig& cfg,
                  AdamState& adam) {
  if (!cfg.adam) {
    for (size_t l = 0; l < net.layers.size(); ++l) {
      net.layers[l].W -= cfg.learning_rate * grads.layers[l].W;
      net.layers[l].b -= cfg.learning_rate * grads.layers[l].b;
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++adam.t;
  const double corr1 = 1.0 - std::pow(b1, adam.t);
  const double corr2 = 1.0 - std::pow(b2, adam.t);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto step = [&](Eigen::Ref<Eigen::MatrixXd> theta, const Eigen::MatrixXd& g,
                    Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      const Eigen::MatrixXd mhat = m / corr1;
      const Eigen::MatrixXd vhat = v / corr2;
      theta -= cfg.learning_rate *
               (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    };
    step(net.layers[l].W, grads.layers[l].W, adam.m[l].W, adam.v[l].W);
    step(net.layers[l].b, grads.layers[l].b, adam.m[l].b, adam.v[l].b);
  }
}

struct SampleEval {
  double loss = 0.0;  // weighted squared error
  bool ok = true;
};

// Loss and (optionally) parameter gradients for one sample. The gradient of
// the batch-mean loss is assembled by the caller through the weight scale.
SampleEval eval_sample(ModelKind kind, const Mlp& net, const Scenario& scenario,
                       const Sample& s, double grad_scale, MlpGradients* grads) {
  SampleEval ev;
  MlpCache cache;
  const MlpOutputs out = mlp_forward(net, s.z, grads ? &cache : nullptr);
  if (kind == ModelKind::fc || kind == ModelKind::dfb) {
    const Eigen::VectorXd res = out.f_ref - s.u_expert;
    ev.loss = s.weight * res.squaredNorm();
    if (grads) {
      const Eigen::VectorXd dl_df = 2.0 * s.weight * grad_scale * res;
      mlp_backward(net, cache, dl_df, Eigen::VectorXd::Zero(0), *grads);
    }
    return ev;
  }

  ForwardCache fwd;
  const ControlOutput qp = qp_control(scenario, s.x, out.f_ref, out.penalties,
                                      /*allow_relaxation=*/true, &fwd);
  if (!qp.feasible) {
    ev.ok = false;
    return ev;
  }
  const Eigen::VectorXd res = qp.u - s.u_expert;
  ev.loss = s.weight * res.squaredNorm();
  if (grads) {
    const Eigen::VectorXd dl_du = 2.0 * s.weight * grad_scale * res;
    const LayerGradients lg = layer_backward(fwd, dl_du);
    if (lg.degenerate)
      io::log_kv("degenerate_kkt", {{"traj", std::to_string(s.traj_index)}});
    Eigen::VectorXd dl_dp = Eigen::VectorXd::Zero(scenario.penalty_dim);
    Eigen::Index offset = 0;
    for (size_t j = 0; j < scenario.constraints.size(); ++j) {
      const int m = scenario.constraints[j].rel_degree;
      for (size_t r = 0; r < fwd.rows.size(); ++r)
        if (fwd.rows[r].constraint_index == static_cast<int>(j))
          dl_dp.segment(offset, m) +=
              lg.d_penalties.row(static_cast<Eigen::Index>(r)).head(m).transpose();
      offset += m;
    }
    mlp_backward(net, cache, lg.d_f_ref, dl_dp, *grads);
  }
  return ev;
}

}  // namespace

TrainResult train_model(ModelKind kind, Mlp& net, const Scenario& scenario,
                        const Dataset& dataset, const TrainConfig& config) {
  if (kind == ModelKind::dfb)
    throw std::invalid_argument("train_model: a DFB is an FC net; train kind=fc");
  if (config.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be > 0");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");

  TrainResult result;
  if (dataset.samples.empty() || config.epochs == 0) return result;

  // Input standardization from the dataset, stored with the model.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(net.config.input_dim);
  for (const auto& s : dataset.samples) mean += s.z;
  mean /= static_cast<double>(dataset.samples.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(net.config.input_dim);
  for (const auto& s : dataset.samples) var += (s.z - mean).cwiseAbs2();
  var /= static_cast<double>(dataset.samples.size());
  net.set_normalization(mean, var.cwiseSqrt());

  // 90/10 split by trajectory, not by sample, to avoid leakage.
  std::mt19937_64 rng(config.seed);
  std::vector<int> traj_order(static_cast<size_t>(dataset.num_trajectories));
  for (size_t i = 0; i < traj_order.size(); ++i) traj_order[i] = static_cast<int>(i);
  shuffle_indices(traj_order, rng);
  const int val_trajs = dataset.num_trajectories >= 10
                            ? static_cast<int>(std::round(config.val_fraction *
                                                          dataset.num_trajectories))
                            : 0;
  std::vector<bool> is_val(static_cast<size_t>(dataset.num_trajectories), false);
  for (int i = 0; i < val_trajs; ++i)
    is_val[static_cast<size_t>(traj_order[traj_order.size() - 1 - static_cast<size_t>(i)])] = true;

  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    if (is_val[static_cast<size_t>(dataset.samples[i].traj_index)])
      val_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  AdamState adam;
  adam.init(net);
  MlpGradients grads;
  grads.resize_like(net);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(train_idx, rng);
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (size_t start = 0; start < train_idx.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(train_idx.size(), start + static_cast<size_t>(config.batch_size));
      double batch_weight = 0.0;
      for (size_t i = start; i < end; ++i)
        batch_weight += dataset.samples[train_idx[i]].weight;
      if (batch_weight <= 0.0) continue;
      grads.set_zero();
      for (size_t i = start; i < end; ++i) {
        const Sample& s = dataset.samples[train_idx[i]];
        const SampleEval ev =
            eval_sample(kind, net, scenario, s, 1.0 / batch_weight, &grads);
        if (!ev.ok) {
          io::log_kv("train_sample_infeasible",
                     {{"traj", std::to_string(s.traj_index)}});
          continue;
        }
        epoch_loss += ev.loss;
        epoch_weight += s.weight;
      }
      apply_update(net, grads, config, adam);
    }
    const double train_loss = epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0;
    if (!std::isfinite(train_loss))
      throw std::runtime_error("train_model: non-finite loss (learning-rate fault)");

    double val_loss = 0.0;
    double val_weight = 0.0;
    for (size_t i : val_idx) {
      const SampleEval ev =
          eval_sample(kind, net, scenario, dataset.samples[i], 0.0, nullptr);
      if (!ev.ok) continue;
      val_loss += ev.loss;
      val_weight += dataset.samples[i].weight;
    }
    result.train_loss.push_back(train_loss);
    result.val_loss.push_back(val_weight > 0.0 ? val_loss / val_weight : 0.0);
  }
  return result;
}

RolloutMetrics rollout_metrics(const Scenario& scenario, const Trajectory& traj,
                               const Controller& expert) {
  RolloutMetrics m;
  m.min_b = traj.min_b();
  m.infeasible_steps = traj.infeasible_steps();
  m.relaxed_steps = traj.relaxed_steps();
  m.reached = traj.reached_goal;

  if (!traj.solve_us.empty()) {
    double total = 0.0;
    for (double v : traj.solve_us) total += v;
    m.mean_solve_us = total / static_cast<double>(traj.solve_us.size());
  }

  double mse = 0.0;
  int mse_count = 0;
  for (int k = 0; k < traj.steps(); ++k) {
    const ControlOutput ue =
        expert(traj.states[static_cast<size_t>(k)], traj.observations[static_cast<size_t>(k)]);
    if (!ue.feasible) continue;
    mse += (traj.controls[static_cast<size_t>(k)] - ue.u).squaredNorm();
    ++mse_count;
  }
  m.mse_expert = mse_count > 0 ? mse / mse_count : 0.0;

  const Eigen::VectorXd& xf = traj.states.back();
  switch (scenario.config.kind) {
    case ScenarioKind::merging: {
      m.dest_error = std::max(0.0, scenario.config.zone_length - xf(2));
      double ratio = kInf;
      for (const auto& x : traj.states)
        if (x(3) > 1e-6) ratio = std::min(ratio, (x(0) - x(2)) / x(3));
      m.min_headway_ratio = ratio;
      break;
    }
    case ScenarioKind::nav2d:
      m.dest_error = std::hypot(xf(0) - traj.goal(0), xf(1) - traj.goal(1));
      break;
    case ScenarioKind::nav3d: {
      const Eigen::Vector3d p(xf(0), xf(2), xf(4));
      m.dest_error = (p - Eigen::Vector3d(scenario.config.destination.head(3))).norm();
      break;
    }
  }
  return m;
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("BARRIERNET_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

EvalReport evaluate(ModelKind kind, const Mlp& net, const ScenarioConfig& config,
                    const EvalOptions& options, int keep_trajectories) {
  const Scenario scenario = make_scenario(config, options.eval_profile);
  const Controller controller = make_controller(kind, net, scenario);
  const Controller expert = make_expert_controller(scenario);

  // Episodes are drawn up front so the set is identical for every model and
  // thread count.
  std::mt19937_64 rng(options.seed);
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<size_t>(options.rollouts));
  for (int i = 0; i < options.rollouts; ++i)
    episodes.push_back(sample_episode(scenario, rng));

  std::vector<RolloutMetrics> metrics(static_cast<size_t>(options.rollouts));
  std::vector<Trajectory> trajectories(static_cast<size_t>(options.rollouts));
  const int threads = std::max(1, std::min(options.threads, options.rollouts));

  auto run_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const Trajectory traj = rollout(scenario, controller, episodes[static_cast<size_t>(i)]);
      metrics[static_cast<size_t>(i)] = rollout_metrics(scenario, traj, expert);
      if (i < keep_trajectories) trajectories[static_cast<size_t>(i)] = traj;
    }
  };
  if (threads <= 1) {
    run_range(0, options.rollouts);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (options.rollouts + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(options.rollouts, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  report.rollouts = std::move(metrics);
  report.min_b = kInf;
  for (const auto& m : report.rollouts) {
    report.min_b = std::min(report.min_b, m.min_b);
    report.mean_mse += m.mse_expert;
    report.mean_solve_us += m.mean_solve_us;
    report.mean_dest_error += m.dest_error;
    report.infeasible_steps += m.infeasible_steps;
    report.relaxed_steps += m.relaxed_steps;
    report.reached_count += m.reached ? 1 : 0;
  }
  if (!report.rollouts.empty()) {
    const double n = static_cast<double>(report.rollouts.size());
    report.mean_mse /= n;
    report.mean_solve_us /= n;
    report.mean_dest_error /= n;
  }
  for (int i = 0; i < keep_trajectories && i < options.rollouts; ++i)
    report.trajectories.push_back(std::move(trajectories[static_cast<size_t>(i)]));
  return report;
}

namespace {

std::string traj_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%04d.csv", index);
  return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const Scenario& scenario) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["scenario"] = dataset.scenario;
  manifest["seed"] = dataset.seed;
  manifest["sample_stride"] = dataset.sample_stride;
  manifest["num_trajectories"] = dataset.num_trajectories;
  manifest["state_dim"] = scenario.system.state_dim;
  manifest["obs_dim"] = scenario.obs_dim;
  manifest["control_dim"] = scenario.system.control_dim;
  nlohmann::json pen = nlohmann::json::array();
  for (Eigen::Index i = 0; i < dataset.expert_penalties.size(); ++i)
    pen.push_back(dataset.expert_penalties(i));
  manifest["expert_penalties"] = pen;

  // One CSV per trajectory: t is implicit (stride * dt), columns x, z, u.
  std::vector<std::string> header;
  for (int i = 0; i < scenario.system.state_dim; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < scenario.obs_dim; ++i) header.push_back("z" + std::to_string(i));
  for (int i = 0; i < scenario.system.control_dim; ++i) header.push_back("u" + std::to_string(i));

  nlohmann::json trajs = nlohmann::json::array();
  for (int t = 0; t < dataset.num_trajectories; ++t) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : dataset.samples) {
      if (s.traj_index != t) continue;
      std::vector<double> row;
      for (Eigen::Index i = 0; i < s.x.size(); ++i) row.push_back(s.x(i));
      for (Eigen::Index i = 0; i < s.z.size(); ++i) row.push_back(s.z(i));
      for (Eigen::Index i = 0; i < s.u_expert.size(); ++i) row.push_back(s.u_expert(i));
      rows.push_back(std::move(row));
    }
    const std::string file = traj_filename(t);
    io::write_csv(dir / file, header, rows);
    nlohmann::json tj;
    tj["file"] = file;
    tj["samples"] = rows.size();
    tj["min_b"] = dataset.traj_min_b[static_cast<size_t>(t)];
    tj["weight"] = dataset.traj_weight[static_cast<size_t>(t)];
    trajs.push_back(std::move(tj));
  }
  manifest["trajectories"] = std::move(trajs);

  std::ofstream out(dir / "manifest.json");
  if (!out) throw io::ConfigError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw io::ConfigError("cannot open manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw io::ConfigError("malformed manifest in " + dir.string() + ": " + e.what());
  }

  Dataset ds;
  ds.scenario = manifest.at("scenario").get<std::string>();
  ds.seed = manifest.at("seed").get<uint64_t>();
  ds.sample_stride = manifest.at("sample_stride").get<int>();
  const int n = manifest.at("state_dim").get<int>();
  const int d = manifest.at("obs_dim").get<int>();
  const int q = manifest.at("control_dim").get<int>();
  const auto& pen = manifest.at("expert_penalties");
  ds.expert_penalties.resize(pen.size());
  for (size_t i = 0; i < pen.size(); ++i)
    ds.expert_penalties(static_cast<Eigen::Index>(i)) = pen[i].get<double>();

  int traj_index = 0;
  for (const auto& tj : manifest.at("trajectories")) {
    const io::Csv csv = io::read_csv(dir / tj.at("file").get<std::string>());
    const double weight = tj.at("weight").get<double>();
    for (const auto& row : csv.rows) {
      if (static_cast<int>(row.size()) != n + d + q)
        throw io::ConfigError("dataset row width mismatch in " + dir.string());
      Sample s;
      s.x = Eigen::Map<const Eigen::VectorXd>(row.data(), n);
      s.z = Eigen::Map<const Eigen::VectorXd>(row.data() + n, d);
      s.u_expert = Eigen::Map<const Eigen::VectorXd>(row.data() + n + d, q);
      s.weight = weight;
      s.traj_index = traj_index;
      ds.samples.push_back(std::move(s));
    }
    ds.traj_min_b.push_back(tj.at("min_b").get<double>());
    ds.traj_weight.push_back(weight);
    ++traj_index;
  }
  ds.num_trajectories = traj_index;
  return ds;
}

}  // namespace barriernet
