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

#include "cdiff/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cdiff/checkpoint.hpp"
#include "json.hpp"

namespace cdiff {

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Separate stream for power-iteration start vectors, so the data stream is
// identical across gamma settings.
constexpr uint64_t kPiStreamSalt = 0x9e3779b97f4a7c15ull;

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("train.steps: must be >= 1");
  if (batch_size < 1) {
    throw std::invalid_argument("train.batch_size: must be >= 1");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("train.learning_rate: must be > 0");
  }
  if (ema_rate < 0.9 || ema_rate >= 1.0) {
    throw std::invalid_argument("train.ema_rate: must be in [0.9, 1)");
  }
  if (eval_every < 1 || checkpoint_every < 1) {
    throw std::invalid_argument(
        "train.eval_every and train.checkpoint_every: must be >= 1");
  }
  if (data_pool_size < 1) {
    throw std::invalid_argument("train.data_pool_size: must be >= 1");
  }
  if (data_fraction <= 0.0 || data_fraction > 1.0) {
    throw std::invalid_argument("train.data_fraction: must be in (0, 1]");
  }
  contraction.validate();
}

std::string RunLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += "{\"step\":" + std::to_string(r.step) +
           ",\"dsm_loss\":" + format_double(r.dsm_loss) +
           ",\"contraction_loss\":" + format_double(r.contraction_loss) +
           ",\"mean_lambda_hat\":" + format_double(r.mean_lambda_hat) + "}\n";
  }
  return out;
}

void RunLog::save_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("run log: cannot open " + path);
  out << to_jsonl();
}

double dsm_loss(const ScoreField& net, const NoiseSchedule& sched,
                const std::vector<TrainSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  double total = 0.0;
  for (const auto& b : batch) {
    const Vec a_t = forward_perturb(b.a0, b.t, b.eps, sched);
    const Vec e = net.epsilon(a_t, b.s, b.t);
    total += (e - b.eps).squaredNorm();
  }
  total /= static_cast<double>(batch.size());
  if (!std::isfinite(total)) {
    throw std::runtime_error("dsm_loss: non-finite value");
  }
  return total;
}

LossParts total_loss_and_grad(const ScoreNetwork& net,
                              const NoiseSchedule& sched,
                              const std::vector<TrainSample>& batch,
                              const ContractionConfig& cfg, Rng& pi_rng,
                              std::vector<double>* grad) {
  if (batch.empty()) {
    throw std::invalid_argument("total_loss_and_grad: empty batch");
  }
  cfg.validate();
  const double B = static_cast<double>(batch.size());
  const int d = net.action_dim();
  LossParts parts;
  for (const auto& b : batch) {
    const Vec a_t = forward_perturb(b.a0, b.t, b.eps, sched);
    const Vec e = net.epsilon(a_t, b.s, b.t);
    parts.dsm += (e - b.eps).squaredNorm() / B;
    const Vec value_cot = (2.0 / B) * (e - b.eps);

    std::vector<TangentCotangent> tangents;
    const bool gated = b.t <= cfg.contr_steps;
    if (gated) {
      const Mat J = sym(net.epsilon_jacobian(a_t, b.s, b.t));
      parts.mean_lambda_hat += exact_eigmax(J);
      ++parts.gated_count;
      if (cfg.loss_type == ContractionLossType::kEigenHinge) {
        const auto est = lambda_max_estimate(J, cfg.num_pi, pi_rng);
        const double l = hinge_loss(est.lambda_hat, b.t, sched, cfg);
        parts.contraction += l / B;
        if (cfg.gamma > 0.0 && l > -cfg.beta) {
          // d lambda_hat = v^T dJ_eps v with the iterate v detached.
          tangents.push_back(
              {est.eigenvector, (cfg.gamma / B) * est.eigenvector});
        }
      } else {
        Mat dL_dJ;
        const double l = frobenius_loss(J, cfg.beta, &dL_dJ);
        parts.contraction += l / B;
        if (cfg.gamma > 0.0 && l > 0.0) {
          for (int j = 0; j < d; ++j) {
            tangents.push_back(
                {Vec::Unit(d, j), (cfg.gamma / B) * dL_dJ.col(j)});
          }
        }
      }
    }
    if (grad != nullptr) {
      net.accumulate_gradient(a_t, b.s, b.t, &value_cot, tangents, *grad);
    }
  }
  if (parts.gated_count > 0) parts.mean_lambda_hat /= parts.gated_count;
  parts.total = parts.dsm + cfg.gamma * parts.contraction;
  if (!std::isfinite(parts.total)) {
    throw std::runtime_error("total_loss_and_grad: non-finite loss");
  }
  return parts;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("adam_step: non-finite gradient");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void ema_update(std::vector<double>& ema, const std::vector<double>& params,
                double rate) {
  if (ema.size() != params.size()) {
    throw std::invalid_argument("ema_update: shape mismatch");
  }
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("ema_update: rate must be in [0, 1)");
  }
  for (size_t i = 0; i < ema.size(); ++i) {
    ema[i] = rate * ema[i] + (1.0 - rate) * params[i];
  }
}

std::vector<std::pair<Vec, Vec>> draw_data_pool(const GmmTask& task, int size,
                                                Rng& rng) {
  std::vector<std::pair<Vec, Vec>> pool;
  pool.reserve(size);
  for (int i = 0; i < size; ++i) pool.push_back(sample_pair(task, rng));
  return pool;
}

TrainResult train(const TrainConfig& cfg, const GmmTask& task,
                  const std::string& out_dir) {
  cfg.validate();
  task.validate();
  if (cfg.network.d_a != task.d_a || cfg.network.d_s != task.d_s) {
    throw std::invalid_argument("train: network dims do not match the task");
  }

  TrainResult res{ScoreNetwork(cfg.network), {}, {}, false, 0};
  ScoreNetwork& net = res.net;
  Rng data_rng(cfg.rng_seed);
  Rng pi_rng(cfg.rng_seed ^ kPiStreamSalt);
  net.init_random(data_rng);
  res.ema_params = net.params();

  const auto pool = draw_data_pool(task, cfg.data_pool_size, data_rng);
  const auto pool_used = std::max<uint64_t>(
      1, static_cast<uint64_t>(
             std::llround(cfg.data_fraction * cfg.data_pool_size)));

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
  }
  auto write_checkpoint = [&](int step) {
    if (out_dir.empty()) return;
    Checkpoint ckpt;
    ckpt.network = cfg.network;
    ckpt.schedule = cfg.schedule;
    ckpt.params = net.params();
    ckpt.ema_params = res.ema_params;
    nlohmann::json meta;
    meta["step"] = step;
    meta["rng_seed"] = cfg.rng_seed;
    meta["gamma"] = cfg.contraction.gamma;
    meta["loss_type"] = to_string(cfg.contraction.loss_type);
    meta["task"] = format_task(task);
    ckpt.metadata_json = meta.dump();
    save_checkpoint(ckpt, out_dir + "/checkpoint_" + std::to_string(step) +
                              ".bin");
  };

  AdamState adam;
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<TrainSample> batch(cfg.batch_size);
  // Last state known to be finite; restored when a step blows up.
  std::vector<double> good_params = net.params();
  std::vector<double> good_ema = res.ema_params;
  int good_step = 0;

  const double t_lo = cfg.schedule.t_eps;
  const double t_hi = 1.0 - cfg.schedule.t_eps;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& [a0, s] = pool[data_rng.uniform_int(pool_used)];
      batch[b].a0 = a0;
      batch[b].s = s;
      batch[b].t = data_rng.uniform(t_lo, t_hi);
      batch[b].eps = data_rng.normal_vec(task.d_a);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    LossParts parts;
    try {
      parts = total_loss_and_grad(net, cfg.schedule, batch, cfg.contraction,
                                  pi_rng, &grad);
    } catch (const std::runtime_error&) {
      net.params() = good_params;
      res.ema_params = good_ema;
      res.aborted = true;
      res.completed_steps = good_step;
      break;
    }

    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (gnorm > cfg.grad_clip_norm) {
      const double scale = cfg.grad_clip_norm / gnorm;
      for (double& g : grad) g *= scale;
    }
    adam_step(net.params(), grad, adam, cfg.learning_rate, cfg.adam_beta1,
              cfg.adam_beta2, cfg.adam_eps);
    ema_update(res.ema_params, net.params(), cfg.ema_rate);
    res.completed_steps = step;

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      res.log.records.push_back(
          {step, parts.dsm, parts.contraction, parts.mean_lambda_hat});
    }
    if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
      write_checkpoint(step);
      good_params = net.params();
      good_ema = res.ema_params;
      good_step = step;
    }
  }

  if (!out_dir.empty()) {
    res.log.save_jsonl(out_dir + "/run_log.jsonl");
  }
  return res;
}

}  // namespace cdiff
