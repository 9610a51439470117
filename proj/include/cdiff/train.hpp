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

#ifndef CDIFF_TRAIN_HPP_
#define CDIFF_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cdiff/contraction.hpp"
#include "cdiff/network.hpp"
#include "cdiff/schedule.hpp"
#include "cdiff/toyworld.hpp"

namespace cdiff {

struct TrainConfig {
  int steps = 5000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_rate = 0.999;
  double grad_clip_norm = 10.0;
  uint64_t rng_seed = 0;
  int eval_every = 100;
  int checkpoint_every = 1000;
  // Training draws from a finite pool of (a0, s) pairs; data_fraction
  // restricts sampling to the first fraction of the pool, so fraction 1.0
  // is bit-identical to unrestricted training.
  int data_pool_size = 10000;
  double data_fraction = 1.0;
  ContractionConfig contraction;
  NoiseSchedule schedule;
  NetworkConfig network;

  void validate() const;
};

// One frozen training sample: clean action, conditioning, diffusion time
// and the drawn target noise. Freezing the batch makes loss and gradient
// functions deterministic and finite-difference checkable.
struct TrainSample {
  Vec a0;
  Vec s;
  double t = 0.0;
  Vec eps;
};

struct RunRecord {
  int step = 0;
  double dsm_loss = 0.0;
  double contraction_loss = 0.0;
  double mean_lambda_hat = 0.0;
};

// Append-only per-evaluation log. Serialized as one JSON object per line.
// Timing is intentionally not persisted so reruns are byte-identical.
struct RunLog {
  std::vector<RunRecord> records;

  std::string to_jsonl() const;
  void save_jsonl(const std::string& path) const;
};

// Mean over the batch of ||eps_hat(alpha a0 + sigma eps, s, t) - eps||^2.
// Throws std::runtime_error on non-finite values.
double dsm_loss(const ScoreField& net, const NoiseSchedule& sched,
                const std::vector<TrainSample>& batch);

struct LossParts {
  double dsm = 0.0;
  double contraction = 0.0;  // unweighted; total adds gamma * this
  double total = 0.0;
  double mean_lambda_hat = 0.0;  // exact, over gated elements
  int gated_count = 0;
};

// Loss and, when grad is non-null, the parameter gradient of
// dsm + gamma * contraction on the frozen batch. pi_rng feeds the
// power-iteration start vectors only. grad must be zeroed by the caller.
LossParts total_loss_and_grad(const ScoreNetwork& net,
                              const NoiseSchedule& sched,
                              const std::vector<TrainSample>& batch,
                              const ContractionConfig& cfg, Rng& pi_rng,
                              std::vector<double>* grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;
};

// Standard Adam with bias correction. Throws on non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps);

void ema_update(std::vector<double>& ema, const std::vector<double>& params,
                double rate);

struct TrainResult {
  ScoreNetwork net;           // raw parameters
  std::vector<double> ema_params;
  RunLog log;
  bool aborted = false;  // non-finite loss; params are the last good snapshot
  int completed_steps = 0;
};

// Deterministic given cfg.rng_seed. When out_dir is non-empty, writes
// checkpoint_<step>.bin snapshots and run_log.jsonl under it.
TrainResult train(const TrainConfig& cfg, const GmmTask& task,
                  const std::string& out_dir = "");

// Draws the finite data pool used by train (exposed for diagnostics).
std::vector<std::pair<Vec, Vec>> draw_data_pool(const GmmTask& task, int size,
                                                Rng& rng);

}  // namespace cdiff

#endif  // CDIFF_TRAIN_HPP_
