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

#ifndef CDIFF_SCHEDULE_HPP_
#define CDIFF_SCHEDULE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "cdiff/rng.hpp"

namespace cdiff {

enum class ScheduleKind { kLinearVp, kCosineVp };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

// Variance-preserving noise schedule. alpha(t)^2 + sigma(t)^2 = 1 for all t,
// with alpha strictly decreasing from ~1 at t=0 to ~0 at t=1. Times are
// clamped to [t_eps, 1 - t_eps]; h(t) = g(t)^2 / (2 sigma_t) diverges at
// t = 0, which is why the clamp exists.
//
// Note: the linear_vp beta range defaults to (0.1, 20), the common
// continuous-VP convention. cosine_vp uses the shifted-cosine signal scale
// with offset s = 0.008; beta_min/beta_max are ignored for it.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kLinearVp;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_eps = 1e-3;

  double clamp_time(double t) const;

  double log_alpha(double t) const;
  double alpha(double t) const;
  double sigma(double t) const;
  std::pair<double, double> alpha_sigma(double t) const;

  // d(log alpha)/dt, analytic; strictly negative on the clamped range.
  double drift_f(double t) const;
  // g(t)^2 = d(sigma^2)/dt - 2 f sigma^2; equals -2 f for any VP schedule.
  double diffusion_g2(double t) const;
  // h(t) = g(t)^2 / (2 sigma_t) > 0.
  double h_coeff(double t) const;
  // -f(t)/h(t); equals sigma_t for VP schedules.
  double contraction_threshold(double t) const;

  // log(alpha_t / sigma_t), the half-log-SNR; strictly decreasing in t.
  double half_log_snr(double t) const;
  // Inverse of half_log_snr on the clamped time range (bisection).
  double time_from_half_log_snr(double lambda) const;
};

// a_t = alpha_t a0 + sigma_t eps. Throws on dimension mismatch.
Vec forward_perturb(const Vec& a0, double t, const Vec& eps,
                    const NoiseSchedule& sched);

// Discrete-time view of a continuous schedule on the grid t_i = i/T,
// i = 1..T. alpha_bars[i-1] = alpha(i/T)^2 so the discrete marginal matches
// the continuous one; per-step alphas are cumulative-product ratios with
// the convention alpha_bar_0 = 1.
struct DiscreteSchedule {
  int num_steps = 0;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> posterior_sigmas;

  // Continuous time fed to the score field at step index i (0-based).
  double step_time(int index) const {
    return static_cast<double>(index + 1) / num_steps;
  }
};

// Throws std::invalid_argument if T < 2.
DiscreteSchedule discretize(const NoiseSchedule& sched, int T);

}  // namespace cdiff

#endif  // CDIFF_SCHEDULE_HPP_
