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

#ifndef CDIFF_SAMPLER_HPP_
#define CDIFF_SAMPLER_HPP_

#include <vector>

#include "cdiff/network.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

// One reverse-time trajectory. times[0] is the seed time (1 for the
// continuous samplers), strictly decreasing from there. states[i] is the
// action at times[i]. per_step_jacobians, when recorded, holds the exact
// Jacobian of each update map so their ordered product differentiates the
// whole seed-to-sample map. noises holds the per-step DDPM draws.
struct Flow {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Mat> per_step_jacobians;
  std::vector<Vec> noises;
  Vec seed;
  Vec state;

  const Vec& final_state() const { return states.back(); }
};

// Gronwall accounting for one audited flow, in traversed (sampler) time.
struct GronwallRecord {
  double integral = 0.0;      // trapezoid of lambda_max(sym J) over the flow
  double bound_factor = 1.0;  // exp(integral)
  double c = 1.0;             // Euclidean metric constant
  double eta_effective = 0.0;  // -integral / interval length
};

struct GronwallResult {
  GronwallRecord record;
  double observed_ratio = 0.0;  // ||delta_end|| / ||delta_start||
  Flow flow;
};

// F_theta(a, s, t) = f(t) a + h(t) eps_hat(a, s, t).
Vec ode_rhs(const ScoreField& net, const NoiseSchedule& sched, const Vec& a,
            const Vec& s, double t);

// J_F = f(t) I + h(t) J_eps.
Mat ode_jacobian(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& a, const Vec& s, double t);

// Explicit Euler on the uniform decreasing grid 1 -> t_eps with N steps.
// Throws std::runtime_error naming the step index on a non-finite state.
Flow sample_euler(const ScoreField& net, const NoiseSchedule& sched,
                  const Vec& s, const Vec& seed, int N,
                  bool record_jacobians = false);

// Second-order data-prediction multistep solver on a grid uniform in
// half-log-SNR. The first step falls back to first order. Exact on the
// linear drift (zero score field).
Flow sample_dpm2m(const ScoreField& net, const NoiseSchedule& sched,
                  const Vec& s, const Vec& seed, int N);

// One deterministic DDIM update from discrete index t_index to t_index-1;
// index 0 maps to the clean sample (alpha_bar_{-1} = 1 convention).
Vec ddim_step(const ScoreField& net, const DiscreteSchedule& dsched,
              const Vec& a, const Vec& s, int t_index);

// One ancestral DDPM update; xi is the caller-supplied standard normal.
Vec ddpm_step(const ScoreField& net, const DiscreteSchedule& dsched,
              const Vec& a, const Vec& s, int t_index, const Vec& xi);

// Exact Jacobians of the discrete updates w.r.t. a (DDPM at fixed xi).
Mat step_jacobian_ddpm(const ScoreField& net, const DiscreteSchedule& dsched,
                       const Vec& a, const Vec& s, int t_index);
Mat step_jacobian_ddim(const ScoreField& net, const DiscreteSchedule& dsched,
                       const Vec& a, const Vec& s, int t_index);

// Full chains over discretize(sched, N). sample_ddpm consumes one noise
// vector per step; samplers never draw randomness internally.
Flow sample_ddim(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& s, const Vec& seed, int N,
                 bool record_jacobians = false);
Flow sample_ddpm(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& s, const Vec& seed,
                 const std::vector<Vec>& noises,
                 bool record_jacobians = false);

// Ordered product of per-step Jacobians, latest step leftmost. Throws on
// an empty list or dimension mismatch.
Mat flow_jacobian(const std::vector<Mat>& per_step_jacobians);

// Jacobian of the one-step clean-action estimate
// x0_hat = (a - sigma eps_hat)/alpha, i.e. (1/alpha)(I - sigma J_eps).
Mat x0_prediction_jacobian(const ScoreField& net, const NoiseSchedule& sched,
                           const Vec& a, const Vec& s, double t);

// Matrix exponential for small dense matrices (scaling and squaring).
Mat expm(const Mat& M);

// Integrates the flow together with the variational system
// d delta/d tau = -J_F delta in traversed time tau (t = 1 - tau direction),
// using an exponential midpoint rule for delta so the log-norm bound holds
// step by step. Accumulates trapezoid of lambda_max(sym(-J_F)) by exact
// eigensolve. delta0 must be a unit direction; N >= 2.
GronwallResult gronwall_audit(const ScoreField& net,
                              const NoiseSchedule& sched, const Vec& s,
                              const Vec& seed, const Vec& delta0, int N);

enum class SamplerKind { kEuler, kDpm2m, kDdim, kDdpm };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

// Uniform front end over the four samplers. rng is consumed only by DDPM
// (one standard normal per step).
Flow run_sampler(SamplerKind kind, const ScoreField& net,
                 const NoiseSchedule& sched, const Vec& s, const Vec& seed,
                 int steps, Rng& rng);

}  // namespace cdiff

#endif  // CDIFF_SAMPLER_HPP_
