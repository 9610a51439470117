// Copyright 2026 The cdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cdiff/checkpoint.hpp"
#include "cdiff/train.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cdiff;

namespace {

NetworkConfig tiny_cfg(int d_a = 1, int layers = 1, int width = 6) {
  NetworkConfig cfg;
  cfg.d_a = d_a;
  cfg.d_s = 1;
  cfg.hidden_layers = layers;
  cfg.hidden_width = width;
  cfg.time_embed_dim = 4;
  return cfg;
}

GmmTask simple_task() {
  GmmTask task;
  task.d_a = 1;
  task.d_s = 1;
  GmmState st;
  st.weight = 1.0;
  st.s = Vec::Zero(1);
  st.components.push_back(
      {1.0, Vec::Constant(1, 0.5), Vec::Constant(1, 0.04)});
  task.states.push_back(st);
  return task;
}

std::vector<TrainSample> frozen_batch(const GmmTask& task, int n,
                                      uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainSample> batch;
  for (int i = 0; i < n; ++i) {
    TrainSample smp;
    auto [a0, s] = sample_pair(task, rng);
    smp.a0 = a0;
    smp.s = s;
    smp.t = rng.uniform(0.05, 0.95);
    smp.eps = rng.normal_vec(task.d_a);
    batch.push_back(std::move(smp));
  }
  return batch;
}

std::string temp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("cdiff_test_") + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("dsm loss closed forms") {
  NoiseSchedule sched;
  const GmmTask task = simple_task();

  SUBCASE("single sample against a hand computation") {
    ZeroField zero(1);
    TrainSample smp;
    smp.a0 = Vec::Constant(1, 0.5);
    smp.s = Vec::Zero(1);
    smp.t = 0.3;
    smp.eps = Vec::Constant(1, -1.2);
    CHECK(dsm_loss(zero, sched, {smp}) == doctest::Approx(1.44));
  }
  SUBCASE("zero predictor scores E||eps||^2 = d_a") {
    ZeroField zero(1);
    const auto batch = frozen_batch(task, 8000, 3);
    CHECK(dsm_loss(zero, sched, batch) == doctest::Approx(1.0).epsilon(0.06));
  }
  SUBCASE("empty batch throws") {
    ZeroField zero(1);
    CHECK_THROWS_AS(dsm_loss(zero, sched, {}), std::invalid_argument);
  }
}

TEST_CASE("total loss composition") {
  NoiseSchedule sched;
  const GmmTask task = simple_task();
  const auto batch = frozen_batch(task, 16, 5);
  const ScoreNetwork net = testutil::random_net(tiny_cfg(), 7);

  SUBCASE("gamma = 0 reduces to the dsm loss bitwise") {
    ContractionConfig cfg;
    cfg.gamma = 0.0;
    Rng pi_rng(1);
    const LossParts parts =
        total_loss_and_grad(net, sched, batch, cfg, pi_rng, nullptr);
    CHECK(parts.total == dsm_loss(net, sched, batch));
    // The unweighted term is still evaluated for logging.
    CHECK(parts.total == parts.dsm);
  }
  SUBCASE("zero field frobenius term is beta^2 d_a per gated sample") {
    ScoreNetwork zeroed = testutil::random_net(tiny_cfg(), 9);
    zeroed.zero_final_layer();
    ContractionConfig cfg;
    cfg.gamma = 0.5;
    cfg.beta = 0.1;
    cfg.loss_type = ContractionLossType::kFrobenius;
    Rng pi_rng(1);
    const LossParts parts =
        total_loss_and_grad(zeroed, sched, batch, cfg, pi_rng, nullptr);
    // ||0 + beta I||_F = beta in 1d for every sample, all gated at
    // contr_steps = 1.
    CHECK(parts.contraction == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(parts.gated_count == 16);
    CHECK(parts.total ==
          doctest::Approx(parts.dsm + 0.5 * parts.contraction));
  }
  SUBCASE("time gate restricts the penalty") {
    ContractionConfig cfg;
    cfg.gamma = 1.0;
    cfg.contr_steps = 1e-9;  // the frozen batch has t >= 0.05
    Rng pi_rng(1);
    const LossParts parts =
        total_loss_and_grad(net, sched, batch, cfg, pi_rng, nullptr);
    CHECK(parts.gated_count == 0);
    CHECK(parts.contraction == 0.0);
  }
}

TEST_CASE("total loss gradient matches finite differences") {
  NoiseSchedule sched;
  const GmmTask task = simple_task();
  const auto batch = frozen_batch(task, 4, 11);

  auto check_grad = [&](const ContractionConfig& cfg, uint64_t net_seed,
                        double tol) {
    const ScoreNetwork net = testutil::random_net(tiny_cfg(), net_seed);
    std::vector<double> grad(net.param_count(), 0.0);
    Rng pi_rng(2);
    total_loss_and_grad(net, sched, batch, cfg, pi_rng, &grad);

    ScoreNetwork probe(net.config());
    const auto fd = testutil::fd_param_gradient(
        [&](const std::vector<double>& p) {
          probe.params() = p;
          // Same power-iteration stream for every probe so the frozen
          // start vectors cancel in the difference.
          Rng fd_rng(2);
          return total_loss_and_grad(probe, sched, batch, cfg, fd_rng,
                                     nullptr)
              .total;
        },
        net.params());
    for (size_t i = 0; i < grad.size(); ++i) {
      const double scale =
          std::max({std::abs(grad[i]), std::abs(fd[i]), 1.0});
      CHECK(std::abs(grad[i] - fd[i]) < tol * scale);
    }
  };

  SUBCASE("frobenius penalty") {
    ContractionConfig cfg;
    cfg.gamma = 0.7;
    cfg.loss_type = ContractionLossType::kFrobenius;
    check_grad(cfg, 13, 1e-4);
  }
  SUBCASE("eigenvalue hinge penalty") {
    ContractionConfig cfg;
    cfg.gamma = 0.7;
    cfg.loss_type = ContractionLossType::kEigenHinge;
    // Many iterations so the detached eigenvector is converged and the
    // envelope gradient matches FD.
    cfg.num_pi = 60;
    check_grad(cfg, 13, 1e-3);
  }
  SUBCASE("pure dsm") {
    ContractionConfig cfg;
    cfg.gamma = 0.0;
    check_grad(cfg, 17, 1e-5);
  }
}

TEST_CASE("one gradient step decreases the frozen-batch loss") {
  NoiseSchedule sched;
  const GmmTask task = simple_task();
  const auto batch = frozen_batch(task, 8, 19);
  ContractionConfig cfg;
  cfg.gamma = 0.1;
  cfg.loss_type = ContractionLossType::kFrobenius;

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    ScoreNetwork net = testutil::random_net(tiny_cfg(), seed);
    std::vector<double> grad(net.param_count(), 0.0);
    Rng pi_rng(4);
    const double before =
        total_loss_and_grad(net, sched, batch, cfg, pi_rng, &grad).total;
    for (size_t i = 0; i < grad.size(); ++i) {
      net.params()[i] -= 1e-5 * grad[i];
    }
    Rng pi_rng2(4);
    const double after =
        total_loss_and_grad(net, sched, batch, cfg, pi_rng2, nullptr).total;
    CHECK(after < before);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters fixed") {
    std::vector<double> p{1.0, -2.0};
    AdamState st;
    adam_step(p, {0.0, 0.0}, st, 0.1, 0.9, 0.999, 1e-8);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by about lr in the gradient sign") {
    std::vector<double> p{0.0};
    AdamState st;
    adam_step(p, {3.0}, st, 0.01, 0.9, 0.999, 1e-8);
    // Bias correction makes m_hat/sqrt(v_hat) = 1 on step one.
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("quadratic bowl converges monotonically near the end") {
    std::vector<double> p{5.0};
    AdamState st;
    for (int i = 0; i < 2000; ++i) {
      adam_step(p, {2.0 * p[0]}, st, 0.05, 0.9, 0.999, 1e-8);
    }
    CHECK(std::abs(p[0]) < 1e-2);
  }
  SUBCASE("errors") {
    std::vector<double> p{0.0};
    AdamState st;
    CHECK_THROWS_AS(
        adam_step(p, {std::nan("")}, st, 0.1, 0.9, 0.999, 1e-8),
        std::runtime_error);
    CHECK_THROWS_AS(adam_step(p, {1.0, 2.0}, st, 0.1, 0.9, 0.999, 1e-8),
                    std::invalid_argument);
  }
}

TEST_CASE("ema update") {
  std::vector<double> ema{0.0, 10.0};
  ema_update(ema, {1.0, 0.0}, 0.0);  // rate 0 copies the parameters
  CHECK(ema[0] == 1.0);
  CHECK(ema[1] == 0.0);

  ema = {0.0};
  for (int i = 0; i < 3; ++i) ema_update(ema, {1.0}, 0.5);
  CHECK(ema[0] == doctest::Approx(1.0 - 0.125));
  CHECK_THROWS_AS(ema_update(ema, {1.0, 2.0}, 0.5), std::invalid_argument);
}

TEST_CASE("training is deterministic in the seed") {
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch_size = 8;
  cfg.eval_every = 10;
  cfg.checkpoint_every = 30;
  cfg.data_pool_size = 200;
  cfg.network = tiny_cfg();
  cfg.learning_rate = 1e-3;
  cfg.contraction.gamma = 0.05;
  cfg.contraction.loss_type = ContractionLossType::kFrobenius;
  cfg.rng_seed = 42;
  const GmmTask task = simple_task();

  const TrainResult r1 = train(cfg, task);
  const TrainResult r2 = train(cfg, task);
  CHECK(r1.net.params() == r2.net.params());
  CHECK(r1.ema_params == r2.ema_params);
  CHECK(r1.log.to_jsonl() == r2.log.to_jsonl());
  CHECK(!r1.aborted);
  CHECK(r1.completed_steps == 30);
  REQUIRE(!r1.log.records.empty());
  CHECK(r1.log.records.front().step == 10);
  CHECK(r1.log.records.back().step == 30);

  cfg.rng_seed = 43;
  const TrainResult r3 = train(cfg, task);
  CHECK(r1.net.params() != r3.net.params());
}

TEST_CASE("gamma zero and gamma positive consume the same data stream") {
  // Separate power-iteration rng: the step-1 record evaluates the shared
  // initial parameters on the shared first batch, so it must match exactly
  // regardless of gamma.
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.batch_size = 8;
  cfg.eval_every = 1;
  cfg.data_pool_size = 100;
  cfg.network = tiny_cfg();
  cfg.contraction.gamma = 0.0;
  const GmmTask task = simple_task();
  const TrainResult a = train(cfg, task);
  cfg.contraction.gamma = 0.5;
  cfg.contraction.loss_type = ContractionLossType::kEigenHinge;
  const TrainResult b = train(cfg, task);
  REQUIRE(!a.log.records.empty());
  REQUIRE(!b.log.records.empty());
  CHECK(a.log.records[0].step == 1);
  CHECK(a.log.records[0].dsm_loss == b.log.records[0].dsm_loss);
}

TEST_CASE("data fraction restricts the pool deterministically") {
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.batch_size = 4;
  cfg.eval_every = 10;
  cfg.data_pool_size = 50;
  cfg.network = tiny_cfg();
  const GmmTask task = simple_task();

  cfg.data_fraction = 1.0;
  const TrainResult full = train(cfg, task);
  const TrainResult full2 = train(cfg, task);
  CHECK(full.net.params() == full2.net.params());

  cfg.data_fraction = 0.1;
  const TrainResult small = train(cfg, task);
  CHECK(small.net.params() != full.net.params());

  cfg.data_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("training reduces the dsm loss on the simple task") {
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.eval_every = 20;
  cfg.data_pool_size = 2000;
  cfg.network = tiny_cfg(1, 2, 16);
  cfg.rng_seed = 7;
  const GmmTask task = simple_task();
  const TrainResult res = train(cfg, task);
  REQUIRE(res.log.records.size() >= 2);
  const double first = res.log.records.front().dsm_loss;
  const double last = res.log.records.back().dsm_loss;
  CHECK(last < 0.5 * first);
}

TEST_CASE("run log serialization") {
  RunLog log;
  log.records.push_back({0, 1.5, 0.25, -0.125});
  log.records.push_back({100, 0.75, 0.0, 0.0});
  const std::string jsonl = log.to_jsonl();
  CHECK(jsonl ==
        "{\"step\":0,\"dsm_loss\":1.5,\"contraction_loss\":0.25,"
        "\"mean_lambda_hat\":-0.125}\n"
        "{\"step\":100,\"dsm_loss\":0.75,\"contraction_loss\":0,"
        "\"mean_lambda_hat\":0}\n");
}

TEST_CASE("train writes checkpoints and logs that round-trip") {
  const std::string dir = temp_dir("train_ckpt");
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.batch_size = 4;
  cfg.eval_every = 10;
  cfg.checkpoint_every = 10;
  cfg.data_pool_size = 100;
  cfg.network = tiny_cfg();
  cfg.rng_seed = 5;
  const GmmTask task = simple_task();
  const TrainResult res = train(cfg, task, dir);

  CHECK(std::filesystem::exists(dir + "/checkpoint_10.bin"));
  CHECK(std::filesystem::exists(dir + "/checkpoint_20.bin"));
  CHECK(std::filesystem::exists(dir + "/run_log.jsonl"));
  CHECK(slurp(dir + "/run_log.jsonl") == res.log.to_jsonl());

  const Checkpoint ckpt = load_checkpoint(dir + "/checkpoint_20.bin");
  CHECK(ckpt.params == res.net.params());
  CHECK(ckpt.ema_params == res.ema_params);
  CHECK(ckpt.network.hidden_width == cfg.network.hidden_width);
  // Metadata embeds the task so sampling can recover conditioning states.
  CHECK(ckpt.metadata_json.find("\"task\"") != std::string::npos);

  // Round-trip through an explicit save.
  save_checkpoint(ckpt, dir + "/copy.bin");
  CHECK(slurp(dir + "/copy.bin") == slurp(dir + "/checkpoint_20.bin"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.network = tiny_cfg();
  CHECK_NOTHROW(cfg.validate());
  TrainConfig bad = cfg;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_size = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.ema_rate = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.data_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
