#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "barriernet/barrier_layer.hpp"
#include "barriernet/mlp.hpp"
#include "barriernet/train.hpp"
#include "support/test_scenarios.hpp"

using namespace barriernet;
using namespace barriernet::testing;

namespace {

MlpConfig small_config(int in, int nr, int np) {
  MlpConfig cfg;
  cfg.input_dim = in;
  cfg.hidden = {5, 4};
  cfg.ref_outputs = nr;
  cfg.penalty_outputs = np;
  cfg.seed = 21;
  return cfg;
}

void zero_weights(Mlp& net) {
  for (auto& l : net.layers) {
    l.W.setZero();
    l.b.setZero();
  }
}

}  // namespace

TEST_CASE("all-zero parameters give zero references and half-cap penalties") {
  Mlp net = Mlp::init(small_config(3, 2, 2));
  zero_weights(net);
  const MlpOutputs out = mlp_forward(net, Eigen::VectorXd::Constant(3, 0.7));
  CHECK(out.f_ref.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.penalties(0) == doctest::Approx(5.0));
  CHECK(out.penalties(1) == doctest::Approx(5.0));
}

TEST_CASE("penalties stay strictly inside (0, cap) even for huge inputs") {
  Mlp net = Mlp::init(small_config(2, 1, 3));
  // blow the head weights up so the preactivation saturates hard
  net.layers.back().W.array() += 50.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd z(2);
    z << 1e6 * unit(rng), 1e6 * unit(rng);
    const MlpOutputs out = mlp_forward(net, z);
    for (Eigen::Index k = 0; k < out.penalties.size(); ++k) {
      CHECK(out.penalties(k) > 0.0);
      CHECK(out.penalties(k) < net.config.penalty_cap);
    }
  }
}

TEST_CASE("single-hidden-unit network matches the hand composition") {
  MlpConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden = {1};
  cfg.ref_outputs = 1;
  cfg.penalty_outputs = 0;
  Mlp net = Mlp::init(cfg);
  net.layers[0].W(0, 0) = 2.0;
  net.layers[0].b(0) = 0.5;
  net.layers[1].W(0, 0) = 3.0;
  net.layers[1].b(0) = -1.0;
  const double z = 0.3;
  const MlpOutputs out = mlp_forward(net, Eigen::VectorXd::Constant(1, z));
  CHECK(out.f_ref(0) == doctest::Approx(3.0 * std::tanh(2.0 * z + 0.5) - 1.0)
                            .epsilon(1e-15));
}

TEST_CASE("backward pass is linear in the upstream gradients") {
  Mlp net = Mlp::init(small_config(3, 2, 1));
  MlpCache cache;
  const Eigen::VectorXd z = (Eigen::VectorXd(3) << 0.1, -0.4, 0.9).finished();
  mlp_forward(net, z, &cache);

  MlpGradients zero;
  zero.resize_like(net);
  mlp_backward(net, cache, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), zero);
  for (const auto& l : zero.layers) {
    CHECK(l.W.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.b.cwiseAbs().maxCoeff() == 0.0);
  }

  const Eigen::VectorXd df = (Eigen::VectorXd(2) << 0.3, -1.1).finished();
  const Eigen::VectorXd dp = Eigen::VectorXd::Constant(1, 0.7);
  MlpGradients once, twice;
  once.resize_like(net);
  twice.resize_like(net);
  mlp_backward(net, cache, df, dp, once);
  mlp_backward(net, cache, df, dp, twice);
  mlp_backward(net, cache, df, dp, twice);  // duplicate sample accumulates
  for (size_t l = 0; l < once.layers.size(); ++l) {
    CHECK((twice.layers[l].W - 2.0 * once.layers[l].W).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((twice.layers[l].b - 2.0 * once.layers[l].b).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("parameter gradients match central finite differences") {
  Mlp net = Mlp::init(small_config(3, 2, 2));
  net.set_normalization((Eigen::VectorXd(3) << 0.2, -0.1, 0.5).finished(),
                        (Eigen::VectorXd(3) << 1.5, 0.8, 2.0).finished());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const Eigen::VectorXd z = (Eigen::VectorXd(3) << 0.4, -1.2, 2.2).finished();
  const Eigen::VectorXd df = (Eigen::VectorXd(2) << 0.9, -0.3).finished();
  const Eigen::VectorXd dp = (Eigen::VectorXd(2) << 0.5, 1.4).finished();

  MlpCache cache;
  mlp_forward(net, z, &cache);
  MlpGradients grads;
  grads.resize_like(net);
  mlp_backward(net, cache, df, dp, grads);

  auto loss = [&]() {
    const MlpOutputs out = mlp_forward(net, z);
    return df.dot(out.f_ref) + dp.dot(out.penalties);
  };
  const double step = 1e-5;
  double max_err = 0.0;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < net.layers[l].W.size(); ++i) {
      double& w = net.layers[l].W.data()[i];
      const double saved = w;
      w = saved + step;
      const double hi = loss();
      w = saved - step;
      const double lo = loss();
      w = saved;
      const double fd = (hi - lo) / (2.0 * step);
      const double an = grads.layers[l].W.data()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      max_err = std::max(max_err, std::abs(fd - an) / denom);
    }
  }
  CHECK(max_err <= 1e-5);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Mlp net = Mlp::init(small_config(4, 2, 2));
  net.set_normalization(Eigen::VectorXd::Constant(4, 0.123456789012345),
                        Eigen::VectorXd::Constant(4, 9.87654321e-3));
  CheckpointMeta meta;
  meta.model_kind = "barriernet";
  meta.scenario = "nav2d";
  meta.trained_epochs = 17;
  meta.seed = 99;

  const auto path = std::filesystem::temp_directory_path() / "bn_ckpt_test.json";
  save_checkpoint(net, meta, path);
  auto [loaded, loaded_meta] = load_checkpoint(path);

  REQUIRE(loaded.layers.size() == net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    REQUIRE(loaded.layers[l].W.size() == net.layers[l].W.size());
    CHECK(std::memcmp(loaded.layers[l].W.data(), net.layers[l].W.data(),
                      sizeof(double) * static_cast<size_t>(net.layers[l].W.size())) == 0);
    CHECK(std::memcmp(loaded.layers[l].b.data(), net.layers[l].b.data(),
                      sizeof(double) * static_cast<size_t>(net.layers[l].b.size())) == 0);
  }
  CHECK(std::memcmp(loaded.norm_mean.data(), net.norm_mean.data(),
                    sizeof(double) * 4) == 0);
  CHECK(std::memcmp(loaded.norm_std.data(), net.norm_std.data(),
                    sizeof(double) * 4) == 0);
  CHECK(loaded_meta.model_kind == meta.model_kind);
  CHECK(loaded_meta.scenario == meta.scenario);
  CHECK(loaded_meta.trained_epochs == meta.trained_epochs);
  CHECK(loaded_meta.seed == meta.seed);
  std::filesystem::remove(path);
}

TEST_CASE("initialization is reproducible for a fixed seed") {
  const Mlp a = Mlp::init(small_config(3, 1, 1));
  const Mlp b = Mlp::init(small_config(3, 1, 1));
  for (size_t l = 0; l < a.layers.size(); ++l)
    CHECK((a.layers[l].W - b.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("end-to-end gradient through net and neuron matches finite differences") {
  const Scenario s = make_scenario(merging_config());
  MlpConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden = {4, 4};
  cfg.ref_outputs = 1;
  cfg.penalty_outputs = 1;
  cfg.seed = 31;

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  int checked = 0;
  double max_err = 0.0;
  for (int trial = 0; trial < 40 && checked < 20; ++trial) {
    Mlp net = Mlp::init(cfg);
    for (auto& l : net.layers) l.W.array() += 0.3 * unit(rng);

    Eigen::VectorXd x(4);
    // keep constraints meaningful: moderate gap, ego often faster
    x << 18.0 + 10.0 * unit(rng), 11.0 + 2.0 * unit(rng), 0.0, 11.5 + 2.0 * unit(rng);
    if (s.constraints[0].b(x) < 0.5) continue;
    const Eigen::VectorXd z = s.observe(x, Eigen::VectorXd());
    const Eigen::VectorXd dl = Eigen::VectorXd::Constant(1, 1.0 + 0.5 * unit(rng));

    auto pipeline = [&](bool* ok, std::vector<bool>* signature) {
      MlpCache cache;
      const MlpOutputs out = mlp_forward(net, z, &cache);
      BarrierLayerInput input;
      input.f_ref = out.f_ref;
      input.rows = {assemble_row(s.constraints[0], x, out.penalties)};
      input.lb = s.system.u_min;
      input.ub = s.system.u_max;
      auto [u, fwd] = layer_forward(input);
      *ok = fwd.status == SolveStatus::optimal;
      if (signature) {
        signature->clear();
        for (Eigen::Index i = 0; i < fwd.h.size(); ++i)
          signature->push_back(fwd.lambda(i) > 1e-9);
      }
      return std::make_tuple(dl.dot(u), cache, fwd);
    };

    bool ok = false;
    std::vector<bool> base_sig;
    auto [loss0, cache, fwd] = pipeline(&ok, &base_sig);
    if (!ok) continue;

    const LayerGradients lg = layer_backward(fwd, dl);
    MlpGradients grads;
    grads.resize_like(net);
    mlp_backward(net, cache, lg.d_f_ref, lg.d_penalties.row(0).head(1), grads);

    const double step = 1e-5;
    bool skipped = false;
    double err = 0.0;
    for (size_t l = 0; l < net.layers.size() && !skipped; ++l) {
      for (Eigen::Index i = 0; i < net.layers[l].W.size() && !skipped; ++i) {
        double& w = net.layers[l].W.data()[i];
        const double saved = w;
        double hi = 0.0, lo = 0.0;
        for (int side = 0; side < 2; ++side) {
          w = saved + (side == 0 ? step : -step);
          bool fd_ok = false;
          std::vector<bool> sig;
          auto [val, c2, f2] = pipeline(&fd_ok, &sig);
          if (!fd_ok || sig != base_sig) {
            skipped = true;
            break;
          }
          (side == 0 ? hi : lo) = val;
        }
        w = saved;
        if (skipped) break;
        const double fd = (hi - lo) / (2.0 * step);
        const double an = grads.layers[l].W.data()[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        err = std::max(err, std::abs(fd - an) / denom);
      }
    }
    if (skipped) continue;
    max_err = std::max(max_err, err);
    ++checked;
  }
  CHECK(checked >= 10);
  CHECK(max_err <= 1e-4);
}
