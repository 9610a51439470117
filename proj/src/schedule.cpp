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

#include "cdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdiff {

namespace {
constexpr double kCosineOffset = 0.008;
}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinearVp:
      return "linear_vp";
    case ScheduleKind::kCosineVp:
      return "cosine_vp";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear_vp") return ScheduleKind::kLinearVp;
  if (name == "cosine_vp") return ScheduleKind::kCosineVp;
  throw std::invalid_argument("schedule.kind: unknown value '" + name +
                              "' (expected linear_vp or cosine_vp)");
}

double NoiseSchedule::clamp_time(double t) const {
  return std::clamp(t, t_eps, 1.0 - t_eps);
}

double NoiseSchedule::log_alpha(double t) const {
  t = clamp_time(t);
  switch (kind) {
    case ScheduleKind::kLinearVp:
      return -0.25 * t * t * (beta_max - beta_min) - 0.5 * t * beta_min;
    case ScheduleKind::kCosineVp: {
      const double s = kCosineOffset;
      const double raw = std::cos(M_PI_2 * (t + s) / (1.0 + s));
      const double raw0 = std::cos(M_PI_2 * s / (1.0 + s));
      return std::log(raw) - std::log(raw0);
    }
  }
  return 0.0;
}

double NoiseSchedule::alpha(double t) const { return std::exp(log_alpha(t)); }

double NoiseSchedule::sigma(double t) const {
  const double a = alpha(t);
  return std::sqrt(std::max(0.0, 1.0 - a * a));
}

std::pair<double, double> NoiseSchedule::alpha_sigma(double t) const {
  const double a = alpha(t);
  return {a, std::sqrt(std::max(0.0, 1.0 - a * a))};
}

double NoiseSchedule::drift_f(double t) const {
  t = clamp_time(t);
  switch (kind) {
    case ScheduleKind::kLinearVp:
      return -0.5 * (beta_min + t * (beta_max - beta_min));
    case ScheduleKind::kCosineVp: {
      const double s = kCosineOffset;
      const double scale = M_PI_2 / (1.0 + s);
      return -scale * std::tan(M_PI_2 * (t + s) / (1.0 + s));
    }
  }
  return 0.0;
}

double NoiseSchedule::diffusion_g2(double t) const {
  // For any VP schedule, d(sigma^2)/dt = -2 f alpha^2, so
  // g^2 = d(sigma^2)/dt - 2 f sigma^2 = -2 f (alpha^2 + sigma^2) = -2 f.
  return -2.0 * drift_f(t);
}

double NoiseSchedule::h_coeff(double t) const {
  return diffusion_g2(t) / (2.0 * sigma(t));
}

double NoiseSchedule::contraction_threshold(double t) const {
  return -drift_f(t) / h_coeff(t);
}

double NoiseSchedule::half_log_snr(double t) const {
  t = clamp_time(t);
  return log_alpha(t) - std::log(sigma(t));
}

double NoiseSchedule::time_from_half_log_snr(double lambda) const {
  // half_log_snr is strictly decreasing in t; bisect on the clamped range.
  double lo = t_eps;
  double hi = 1.0 - t_eps;
  if (lambda >= half_log_snr(lo)) return lo;
  if (lambda <= half_log_snr(hi)) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (half_log_snr(mid) > lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Vec forward_perturb(const Vec& a0, double t, const Vec& eps,
                    const NoiseSchedule& sched) {
  if (a0.size() != eps.size()) {
    throw std::invalid_argument("forward_perturb: dim(eps) != dim(a0)");
  }
  const auto [a, s] = sched.alpha_sigma(t);
  return a * a0 + s * eps;
}

DiscreteSchedule discretize(const NoiseSchedule& sched, int T) {
  if (T < 2) {
    throw std::invalid_argument("discretize: T must be >= 2");
  }
  DiscreteSchedule d;
  d.num_steps = T;
  d.alphas.resize(T);
  d.alpha_bars.resize(T);
  d.posterior_sigmas.resize(T);
  double prev_bar = 1.0;
  for (int i = 0; i < T; ++i) {
    const double t = static_cast<double>(i + 1) / T;
    const double a = sched.alpha(t);
    d.alpha_bars[i] = a * a;
    d.alphas[i] = d.alpha_bars[i] / prev_bar;
    const double var = (1.0 - prev_bar) / (1.0 - d.alpha_bars[i]) *
                       (1.0 - d.alphas[i]);
    d.posterior_sigmas[i] = std::sqrt(std::max(0.0, var));
    prev_bar = d.alpha_bars[i];
  }
  return d;
}

}  // namespace cdiff
