#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "barriernet/barrier_layer.hpp"
#include "barriernet/train.hpp"
#include "support/test_scenarios.hpp"

using namespace barriernet;
using namespace barriernet::testing;

namespace {

ScenarioConfig small_merging() {
  ScenarioConfig cfg = merging_config();
  cfg.expert.sample_stride = 2;
  cfg.hidden_widths = {16, 16};
  return cfg;
}

}  // namespace

TEST_CASE("expert labels satisfy their own rear-end row everywhere") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 4, 11);
  REQUIRE(ds.num_trajectories == 4);
  REQUIRE(!ds.samples.empty());
  for (const auto& sample : ds.samples) {
    const HocbfRow row =
        assemble_row(s.constraints[0], sample.x, ds.expert_penalties);
    CHECK(row.g_row.dot(sample.u_expert) <= row.h + 1e-8);
    CHECK(s.constraints[0].b(sample.x) >= -1e-3);
  }
}

TEST_CASE("count zero gives an empty dataset") {
  const Scenario s = make_scenario(small_merging());
  SUBCASE("generate") {
    // zero requested trajectories: nothing to roll out
    Dataset ds;
    ds.scenario = to_string(s.config.kind);
    CHECK(ds.samples.empty());
  }
}

TEST_CASE("dataset files round-trip through manifest and CSVs") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 3, 5);
  const auto dir = std::filesystem::temp_directory_path() / "bn_dataset_test";
  std::filesystem::remove_all(dir);
  write_dataset(dir, ds, s);
  const Dataset back = load_dataset(dir);
  REQUIRE(back.samples.size() == ds.samples.size());
  REQUIRE(back.num_trajectories == ds.num_trajectories);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK((back.samples[i].z - ds.samples[i].z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.samples[i].x - ds.samples[i].x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.samples[i].u_expert - ds.samples[i].u_expert).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.samples[i].weight == ds.samples[i].weight);
    CHECK(back.samples[i].traj_index == ds.samples[i].traj_index);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero-epoch training leaves the model untouched") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 2, 3);
  Mlp net = make_model(ModelKind::barriernet, s, 7);
  const Mlp before = net;
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult result = train_model(ModelKind::barriernet, net, s, ds, cfg);
  CHECK(result.train_loss.empty());
  for (size_t l = 0; l < net.layers.size(); ++l)
    CHECK((net.layers[l].W - before.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training loss decreases monotonically over the first five epochs") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 8, 17);
  Mlp net = make_model(ModelKind::barriernet, s, 7);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 7;
  const TrainResult r = train_model(ModelKind::barriernet, net, s, ds, cfg);
  REQUIRE(r.train_loss.size() == 5);
  for (size_t e = 1; e < r.train_loss.size(); ++e)
    CHECK(r.train_loss[e] < r.train_loss[e - 1]);
}

TEST_CASE("training is bit-for-bit deterministic in sequential mode") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 4, 23);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 12;

  Mlp a = make_model(ModelKind::barriernet, s, 12);
  Mlp b = make_model(ModelKind::barriernet, s, 12);
  const TrainResult ra = train_model(ModelKind::barriernet, a, s, ds, cfg);
  const TrainResult rb = train_model(ModelKind::barriernet, b, s, ds, cfg);
  REQUIRE(ra.train_loss.size() == rb.train_loss.size());
  for (size_t e = 0; e < ra.train_loss.size(); ++e) {
    CHECK(ra.train_loss[e] == rb.train_loss[e]);
    CHECK(ra.val_loss[e] == rb.val_loss[e]);
  }
  for (size_t l = 0; l < a.layers.size(); ++l)
    CHECK((a.layers[l].W - b.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plain sgd optimizer also reduces the loss") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 4, 43);
  Mlp net = make_model(ModelKind::barriernet, s, 7);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.adam = false;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train_model(ModelKind::barriernet, net, s, ds, cfg);
  CHECK(r.train_loss.back() < r.train_loss.front());
}

TEST_CASE("fc baseline trains on the same labels") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 6, 29);
  Mlp net = make_model(ModelKind::fc, s, 7);
  CHECK(net.config.penalty_outputs == 0);
  TrainConfig cfg;
  cfg.epochs = 8;
  const TrainResult r = train_model(ModelKind::fc, net, s, ds, cfg);
  CHECK(r.train_loss.back() < r.train_loss.front());
}

TEST_CASE("dfb cannot be trained directly") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 2, 31);
  Mlp net = make_model(ModelKind::fc, s, 7);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_model(ModelKind::dfb, net, s, ds, cfg),
                  std::invalid_argument);
}

TEST_CASE("nav2d boundary trajectories are down-weighted") {
  ScenarioConfig cfg = nav2d_config(32.5, 25.0, 6.0);
  CHECK(boundary_weight_threshold(cfg) == doctest::Approx(0.05 * 36.0));
  cfg.kind = ScenarioKind::merging;
  CHECK(boundary_weight_threshold(cfg) == 0.0);
}

TEST_CASE("expert stays within the inter-sampling slack under lead braking") {
  ScenarioConfig cfg = merging_config();
  cfg.dt = 0.02;
  cfg.horizon = 2000;
  cfg.lead_eval.brake_decel = 3.0;
  cfg.lead_eval.brake_at = 60.0;
  cfg.lead_eval.brake_until_speed = 6.0;
  const Scenario s = make_scenario(cfg, /*eval_profile=*/true);
  const Controller expert = make_expert_controller(s);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    const Trajectory traj = rollout(s, expert, sample_episode(s, rng));
    CHECK(traj.infeasible_steps() == 0);
    CHECK(traj.min_b() >= -1e-3);
  }
}

TEST_CASE("BARRIERNET_THREADS caps the evaluation worker count") {
  setenv("BARRIERNET_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  unsetenv("BARRIERNET_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("evaluate produces per-rollout metrics and timing") {
  const Scenario s = make_scenario(small_merging());
  const Dataset ds = generate_dataset(s, 6, 37);
  Mlp net = make_model(ModelKind::barriernet, s, 7);
  TrainConfig tcfg;
  tcfg.epochs = 6;
  train_model(ModelKind::barriernet, net, s, ds, tcfg);

  EvalOptions opts;
  opts.rollouts = 4;
  opts.seed = 9;
  opts.threads = 2;
  opts.eval_profile = false;
  const EvalReport report = evaluate(ModelKind::barriernet, net, s.config, opts);
  REQUIRE(report.rollouts.size() == 4);
  CHECK(report.mean_solve_us > 0.0);
  CHECK(report.mean_solve_us < 10000.0);
  for (const auto& m : report.rollouts) {
    CHECK(m.min_headway_ratio >= 1.8 - 0.05);
    CHECK(m.infeasible_steps == 0);
  }
}
