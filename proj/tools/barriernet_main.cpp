#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "barriernet/barrier_layer.hpp"
#include "barriernet/io.hpp"
#include "barriernet/mlp.hpp"
#include "barriernet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace barriernet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;

struct SweepPlan {
  std::string param;  // empty when no sweep requested
  std::vector<double> values;
};

SweepPlan parse_sweep(const std::string& text) {
  SweepPlan sweep;
  if (text.empty()) return sweep;
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw io::ConfigError("bad --sweep, expected name=v1,v2,...: " + text);
  sweep.param = text.substr(0, eq);
  if (sweep.param != "R")
    throw io::ConfigError("unsupported sweep parameter: " + sweep.param);
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      sweep.values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw io::ConfigError("bad sweep value: " + item);
    }
  }
  if (sweep.values.empty()) throw io::ConfigError("empty sweep list: " + text);
  return sweep;
}

json metrics_to_json(const EvalReport& report) {
  json rollouts = json::array();
  for (const auto& m : report.rollouts) {
    json r;
    r["min_b"] = m.min_b;
    r["min_headway_ratio"] = m.min_headway_ratio;
    r["mse_expert"] = m.mse_expert;
    r["mean_solve_us"] = m.mean_solve_us;
    r["dest_error"] = m.dest_error;
    r["infeasible_steps"] = m.infeasible_steps;
    r["relaxed_steps"] = m.relaxed_steps;
    r["reached"] = m.reached;
    rollouts.push_back(std::move(r));
  }
  json agg;
  agg["min_b"] = report.min_b;
  agg["mean_mse"] = report.mean_mse;
  agg["mean_solve_us"] = report.mean_solve_us;
  agg["mean_dest_error"] = report.mean_dest_error;
  agg["infeasible_steps"] = report.infeasible_steps;
  agg["relaxed_steps"] = report.relaxed_steps;
  agg["reached_count"] = report.reached_count;
  json out;
  out["rollouts"] = std::move(rollouts);
  out["aggregate"] = std::move(agg);
  return out;
}

fs::path checkpoint_path_for(const fs::path& model_arg, ModelKind kind) {
  if (fs::is_directory(model_arg)) {
    // a DFB evaluates the FC checkpoint behind the fixed filter
    const char* name = kind == ModelKind::barriernet ? "barriernet.json" : "fc.json";
    return model_arg / name;
  }
  return model_arg;
}

int cmd_generate(const std::string& scenario_path, const std::string& out_dir,
                 int count, uint64_t seed) {
  const ScenarioConfig cfg = io::load_scenario_config(scenario_path);
  const Scenario scenario = make_scenario(cfg);
  Dataset ds;
  if (count > 0) {
    ds = generate_dataset(scenario, count, seed);
  } else {
    ds.scenario = to_string(cfg.kind);
    ds.seed = seed;
    ds.sample_stride = std::max(1, cfg.expert.sample_stride);
    ds.expert_penalties = cfg.expert.penalties;
  }
  write_dataset(out_dir, ds, scenario);
  std::cout << "wrote " << ds.num_trajectories << " trajectories ("
            << ds.samples.size() << " samples) to " << out_dir << "\n";
  return kExitOk;
}

// Optional training-config JSON; explicit command-line flags take precedence.
TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw io::ConfigError("cannot open training config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw io::ConfigError("malformed training config " + path + ": " + e.what());
  }
  base.epochs = j.value("epochs", base.epochs);
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.seed = j.value("seed", base.seed);
  base.val_fraction = j.value("val_fraction", base.val_fraction);
  if (j.contains("optimizer")) {
    const std::string opt = j["optimizer"].get<std::string>();
    if (opt != "adam" && opt != "sgd")
      throw io::ConfigError("unknown optimizer in " + path + ": " + opt);
    base.adam = opt == "adam";
  }
  if (base.epochs < 0) throw io::ConfigError("epochs must be >= 0 in " + path);
  if (base.learning_rate <= 0.0)
    throw io::ConfigError("learning_rate must be positive in " + path);
  return base;
}

int cmd_train(const std::string& scenario_path, const std::string& data_dir,
              const std::string& model_name, const std::string& out_dir,
              const std::string& resume, TrainConfig train_cfg) {
  const ScenarioConfig cfg = io::load_scenario_config(scenario_path);
  const Scenario scenario = make_scenario(cfg);
  const Dataset dataset = load_dataset(data_dir);
  if (dataset.scenario != to_string(cfg.kind))
    throw io::ConfigError("dataset scenario " + dataset.scenario +
                          " does not match config " + to_string(cfg.kind));

  const ModelKind kind = model_kind_from_string(model_name);
  if (kind == ModelKind::dfb)
    throw io::ConfigError("a DFB shares the FC checkpoint; train --model fc");

  Mlp net = make_model(kind, scenario, train_cfg.seed);
  int epoch_offset = 0;
  if (!resume.empty()) {
    auto [loaded, meta] = load_checkpoint(resume);
    if (meta.model_kind != std::string(to_string(kind)))
      throw io::ConfigError("resume checkpoint is a " + meta.model_kind +
                            " model, requested " + model_name);
    net = std::move(loaded);
    epoch_offset = meta.trained_epochs;
  }

  const TrainResult result = train_model(kind, net, scenario, dataset, train_cfg);

  fs::create_directories(out_dir);
  CheckpointMeta meta;
  meta.model_kind = to_string(kind);
  meta.scenario = to_string(cfg.kind);
  meta.trained_epochs = epoch_offset + static_cast<int>(result.train_loss.size());
  meta.seed = train_cfg.seed;
  save_checkpoint(net, meta, fs::path(out_dir) / (std::string(to_string(kind)) + ".json"));

  std::vector<std::vector<double>> rows;
  for (size_t e = 0; e < result.train_loss.size(); ++e)
    rows.push_back({static_cast<double>(epoch_offset + static_cast<int>(e)),
                    result.train_loss[e], result.val_loss[e]});
  const fs::path loss_path = fs::path(out_dir) / "loss.csv";
  if (!resume.empty() && fs::exists(loss_path)) {
    const io::Csv existing = io::read_csv(loss_path);
    rows.insert(rows.begin(), existing.rows.begin(), existing.rows.end());
  }
  io::write_csv(loss_path, {"epoch", "train_loss", "val_loss"}, rows);

  json snapshot;
  snapshot["scenario_config"] = scenario_path;
  snapshot["data"] = data_dir;
  snapshot["model"] = to_string(kind);
  snapshot["epochs"] = train_cfg.epochs;
  snapshot["learning_rate"] = train_cfg.learning_rate;
  snapshot["optimizer"] = train_cfg.adam ? "adam" : "sgd";
  snapshot["batch_size"] = train_cfg.batch_size;
  snapshot["seed"] = train_cfg.seed;
  std::ofstream snap(fs::path(out_dir) / "config_snapshot.json");
  snap << snapshot.dump(2) << '\n';

  const double last = result.train_loss.empty() ? 0.0 : result.train_loss.back();
  std::cout << "trained " << to_string(kind) << " for " << result.train_loss.size()
            << " epochs, final train loss " << last << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& scenario_path, const std::string& model_arg,
             const std::string& models_csv, const std::string& sweep_text,
             int count, uint64_t seed, const std::string& out_dir,
             int keep_trajectories) {
  const ScenarioConfig base_cfg = io::load_scenario_config(scenario_path);
  const SweepPlan sweep = parse_sweep(sweep_text);

  std::vector<ModelKind> kinds;
  std::stringstream ss(models_csv);
  std::string item;
  while (std::getline(ss, item, ',')) kinds.push_back(model_kind_from_string(item));
  if (kinds.empty()) throw io::ConfigError("no models requested");

  fs::create_directories(out_dir);
  std::vector<double> sweep_values = sweep.values.empty()
                                         ? std::vector<double>{base_cfg.obstacle_radius}
                                         : sweep.values;

  EvalOptions options;
  options.rollouts = count;
  options.seed = seed;
  options.threads = worker_count();

  json entries = json::array();
  for (ModelKind kind : kinds) {
    auto [net, meta] = load_checkpoint(checkpoint_path_for(model_arg, kind));
    if (meta.scenario != std::string(to_string(base_cfg.kind)))
      throw io::ConfigError("checkpoint was trained on " + meta.scenario);
    for (double value : sweep_values) {
      ScenarioConfig cfg = base_cfg;
      if (!sweep.param.empty()) cfg.obstacle_radius = value;
      const EvalReport report = evaluate(kind, net, cfg, options, keep_trajectories);
      json entry = metrics_to_json(report);
      entry["model"] = to_string(kind);
      entry["sweep_value"] = value;
      entries.push_back(std::move(entry));

      for (size_t i = 0; i < report.trajectories.size(); ++i) {
        char name[96];
        std::snprintf(name, sizeof(name), "%s_R%g_%02zu.csv", to_string(kind), value, i);
        io::write_trajectory_csv(fs::path(out_dir) / name, report.trajectories[i]);
      }
      std::cout << to_string(kind) << " " << sweep.param
                << (sweep.param.empty() ? "" : "=") << value
                << ": min_b=" << report.min_b << " mean_mse=" << report.mean_mse
                << " mean_solve_us=" << report.mean_solve_us << "\n";
    }
  }

  json out;
  out["scenario"] = to_string(base_cfg.kind);
  out["sweep_param"] = sweep.param;
  out["rollout_count"] = count;
  out["seed"] = seed;
  out["entries"] = std::move(entries);
  std::ofstream mf(fs::path(out_dir) / "metrics.json");
  if (!mf) throw io::ConfigError("cannot write metrics.json in " + out_dir);
  mf << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_gradcheck(int count, uint64_t seed, const std::string& out_path) {
  const GradCheckSummary s = run_gradcheck(count, seed);
  std::cout << "gradcheck: evaluated=" << s.evaluated << " passed=" << s.passed
            << " failed=" << s.failed << " skipped=" << s.skipped
            << " max_err=" << s.max_err << "\n";
  if (!out_path.empty()) {
    json j;
    j["evaluated"] = s.evaluated;
    j["passed"] = s.passed;
    j["failed"] = s.failed;
    j["skipped"] = s.skipped;
    j["max_err"] = s.max_err;
    std::ofstream out(out_path);
    if (!out) throw io::ConfigError("cannot write report: " + out_path);
    out << j.dump(2) << '\n';
  }
  return s.failed == 0 && s.evaluated == count ? kExitOk : kExitInternal;
}

int cmd_rollout(const std::string& scenario_path, const std::string& model_arg,
                const std::string& kind_override, uint64_t seed,
                const std::string& out_path) {
  const ScenarioConfig cfg = io::load_scenario_config(scenario_path);
  const Scenario scenario = make_scenario(cfg, /*eval_profile=*/true);
  std::mt19937_64 rng(seed);
  const Episode ep = sample_episode(scenario, rng);

  Mlp net;
  Controller controller;
  if (model_arg == "expert") {
    controller = make_expert_controller(scenario);
  } else {
    auto [loaded, meta] = load_checkpoint(model_arg);
    net = std::move(loaded);
    const std::string kind_name = kind_override.empty() ? meta.model_kind : kind_override;
    controller = make_controller(model_kind_from_string(kind_name), net, scenario);
  }
  const Trajectory traj = rollout(scenario, controller, ep);
  io::write_trajectory_csv(out_path, traj);
  std::cout << "rollout: steps=" << traj.steps() << " min_b=" << traj.min_b()
            << " reached=" << (traj.reached_goal ? 1 : 0) << "\n";
  return traj.aborted ? kExitInternal : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BarrierNet safety-layer toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", model_arg, models_csv = "barriernet";
  std::string sweep_text, resume, report_path;
  int count = 100;
  int keep_trajectories = 1;
  uint64_t seed = 7;
  TrainConfig train_cfg;
  std::string optimizer = "adam";

  auto* gen = app.add_subcommand("generate", "roll out the expert and write a dataset");
  gen->add_option("--scenario", scenario_path, "scenario config JSON")->required();
  gen->add_option("--count", count, "number of trajectories");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "fit a model to a dataset");
  std::string data_dir, train_config_path;
  train->add_option("--scenario", scenario_path)->required();
  train->add_option("--data", data_dir, "dataset directory")->required();
  std::string train_model_name = "barriernet";
  train->add_option("--model", train_model_name, "barriernet|fc");
  train->add_option("--out", out_dir)->required();
  train->add_option("--config", train_config_path, "training-config JSON");
  auto* seed_opt = train->add_option("--seed", train_cfg.seed);
  auto* epochs_opt = train->add_option("--epochs", train_cfg.epochs);
  auto* lr_opt = train->add_option("--lr", train_cfg.learning_rate);
  auto* batch_opt = train->add_option("--batch", train_cfg.batch_size);
  auto* optimizer_opt = train->add_option("--optimizer", optimizer, "adam|sgd");
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "evaluate trained models over rollouts");
  eval->add_option("--scenario", scenario_path)->required();
  eval->add_option("--model", model_arg, "checkpoint file or run directory")->required();
  eval->add_option("--models", models_csv, "comma list: barriernet,dfb,fc");
  eval->add_option("--sweep", sweep_text, "e.g. R=6,7,8,9");
  eval->add_option("--count", count, "rollouts per model and sweep value");
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_dir)->required();
  eval->add_option("--trajectories", keep_trajectories,
                   "trajectory CSVs to write per entry");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the layer");
  int grad_count = 500;
  grad->add_option("--count", grad_count);
  grad->add_option("--seed", seed);
  grad->add_option("--out", report_path, "optional JSON report");

  auto* roll = app.add_subcommand("rollout", "single closed-loop rollout to CSV");
  roll->add_option("--scenario", scenario_path)->required();
  roll->add_option("--model", model_arg, "checkpoint file or 'expert'")->required();
  std::string roll_kind;
  roll->add_option("--kind", roll_kind, "override controller kind (e.g. dfb)");
  roll->add_option("--seed", seed);
  std::string roll_out = "trajectory.csv";
  roll->add_option("--out", roll_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(scenario_path, out_dir, count, seed);
    if (train->parsed()) {
      if (!train_config_path.empty()) {
        // file values first, explicit flags win
        TrainConfig from_file = load_train_config(train_config_path, TrainConfig{});
        if (!seed_opt->count()) train_cfg.seed = from_file.seed;
        if (!epochs_opt->count()) train_cfg.epochs = from_file.epochs;
        if (!lr_opt->count()) train_cfg.learning_rate = from_file.learning_rate;
        if (!batch_opt->count()) train_cfg.batch_size = from_file.batch_size;
        if (!optimizer_opt->count()) train_cfg.adam = from_file.adam;
        train_cfg.val_fraction = from_file.val_fraction;
      }
      if (optimizer_opt->count()) {
        if (optimizer != "sgd" && optimizer != "adam")
          throw io::ConfigError("unknown optimizer: " + optimizer);
        train_cfg.adam = optimizer != "sgd";
      }
      return cmd_train(scenario_path, data_dir, train_model_name, out_dir, resume,
                       train_cfg);
    }
    if (eval->parsed())
      return cmd_eval(scenario_path, model_arg, models_csv, sweep_text, count, seed,
                      out_dir, keep_trajectories);
    if (grad->parsed()) return cmd_gradcheck(grad_count, seed, report_path);
    if (roll->parsed())
      return cmd_rollout(scenario_path, model_arg, roll_kind, seed, roll_out);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}
