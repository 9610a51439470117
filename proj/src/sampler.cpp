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

#include "cdiff/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cdiff/contraction.hpp"

namespace cdiff {

namespace {

void check_finite(const Vec& a, const char* where, int step) {
  if (!a.allFinite()) {
    throw std::runtime_error(std::string(where) +
                             ": non-finite state at step " +
                             std::to_string(step));
  }
}

}  // namespace

Vec ode_rhs(const ScoreField& net, const NoiseSchedule& sched, const Vec& a,
            const Vec& s, double t) {
  return sched.drift_f(t) * a + sched.h_coeff(t) * net.epsilon(a, s, t);
}

Mat ode_jacobian(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& a, const Vec& s, double t) {
  const int d = net.action_dim();
  return sched.drift_f(t) * Mat::Identity(d, d) +
         sched.h_coeff(t) * net.epsilon_jacobian(a, s, t);
}

Flow sample_euler(const ScoreField& net, const NoiseSchedule& sched,
                  const Vec& s, const Vec& seed, int N,
                  bool record_jacobians) {
  if (N < 2) throw std::invalid_argument("sample_euler: N must be >= 2");
  const int d = net.action_dim();
  Flow flow;
  flow.seed = seed;
  flow.state = s;
  flow.times.reserve(N + 1);
  flow.states.reserve(N + 1);
  const double span = 1.0 - sched.t_eps;
  for (int k = 0; k <= N; ++k) {
    flow.times.push_back(1.0 - span * k / N);
  }
  Vec a = seed;
  flow.states.push_back(a);
  for (int k = 0; k < N; ++k) {
    const double t = flow.times[k];
    const double dt = flow.times[k + 1] - flow.times[k];  // negative
    if (record_jacobians) {
      flow.per_step_jacobians.push_back(
          Mat::Identity(d, d) + dt * ode_jacobian(net, sched, a, s, t));
    }
    a += dt * ode_rhs(net, sched, a, s, t);
    check_finite(a, "sample_euler", k);
    flow.states.push_back(a);
  }
  return flow;
}

Flow sample_dpm2m(const ScoreField& net, const NoiseSchedule& sched,
                  const Vec& s, const Vec& seed, int N) {
  if (N < 2) throw std::invalid_argument("sample_dpm2m: N must be >= 2");
  Flow flow;
  flow.seed = seed;
  flow.state = s;
  // Grid uniform in half-log-SNR, traversed from t = 1 down to t_eps.
  const double lam_start = sched.half_log_snr(1.0);
  const double lam_end = sched.half_log_snr(sched.t_eps);
  std::vector<double> lams(N + 1);
  flow.times.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    lams[k] = lam_start + (lam_end - lam_start) * k / N;
    flow.times[k] = (k == 0) ? 1.0
                  : (k == N) ? sched.t_eps
                             : sched.time_from_half_log_snr(lams[k]);
  }
  Vec a = seed;
  flow.states.push_back(a);
  Vec x0_prev;  // x0_hat at the previous grid point
  double h_prev = 0.0;
  for (int k = 1; k <= N; ++k) {
    const double t_last = flow.times[k - 1];
    const auto [al_last, sg_last] = sched.alpha_sigma(t_last);
    const Vec x0_last =
        (a - sg_last * net.epsilon(a, s, t_last)) / al_last;
    const auto [al, sg] = sched.alpha_sigma(flow.times[k]);
    const double h = lams[k] - lams[k - 1];
    const double ratio = sg / sg_last;
    const double coef = -al * (std::exp(-h) - 1.0);
    if (k == 1) {
      a = ratio * a + coef * x0_last;
    } else {
      const double r = h_prev / h;
      a = ratio * a +
          coef * ((1.0 + 0.5 / r) * x0_last - (0.5 / r) * x0_prev);
    }
    check_finite(a, "sample_dpm2m", k - 1);
    flow.states.push_back(a);
    x0_prev = x0_last;
    h_prev = h;
  }
  return flow;
}

Vec ddim_step(const ScoreField& net, const DiscreteSchedule& dsched,
              const Vec& a, const Vec& s, int t_index) {
  if (t_index < 0 || t_index >= dsched.num_steps) {
    throw std::invalid_argument("ddim_step: index out of range");
  }
  const double abar = dsched.alpha_bars[t_index];
  const double abar_prev = (t_index > 0) ? dsched.alpha_bars[t_index - 1] : 1.0;
  const Vec eps = net.epsilon(a, s, dsched.step_time(t_index));
  const Vec x0 = (a - std::sqrt(1.0 - abar) * eps) / std::sqrt(abar);
  return std::sqrt(abar_prev) * x0 + std::sqrt(1.0 - abar_prev) * eps;
}

Vec ddpm_step(const ScoreField& net, const DiscreteSchedule& dsched,
              const Vec& a, const Vec& s, int t_index, const Vec& xi) {
  if (t_index < 0 || t_index >= dsched.num_steps) {
    throw std::invalid_argument("ddpm_step: index out of range");
  }
  const double al = dsched.alphas[t_index];
  const double abar = dsched.alpha_bars[t_index];
  const Vec eps = net.epsilon(a, s, dsched.step_time(t_index));
  return (a - ((1.0 - al) / std::sqrt(1.0 - abar)) * eps) / std::sqrt(al) +
         dsched.posterior_sigmas[t_index] * xi;
}

Mat step_jacobian_ddpm(const ScoreField& net, const DiscreteSchedule& dsched,
                       const Vec& a, const Vec& s, int t_index) {
  const double al = dsched.alphas[t_index];
  const double abar = dsched.alpha_bars[t_index];
  const int d = net.action_dim();
  const Mat J = net.epsilon_jacobian(a, s, dsched.step_time(t_index));
  return (Mat::Identity(d, d) - ((1.0 - al) / std::sqrt(1.0 - abar)) * J) /
         std::sqrt(al);
}

Mat step_jacobian_ddim(const ScoreField& net, const DiscreteSchedule& dsched,
                       const Vec& a, const Vec& s, int t_index) {
  const double abar = dsched.alpha_bars[t_index];
  const double abar_prev = (t_index > 0) ? dsched.alpha_bars[t_index - 1] : 1.0;
  const int d = net.action_dim();
  const Mat J = net.epsilon_jacobian(a, s, dsched.step_time(t_index));
  return std::sqrt(abar_prev / abar) *
             (Mat::Identity(d, d) - std::sqrt(1.0 - abar) * J) +
         std::sqrt(1.0 - abar_prev) * J;
}

Flow sample_ddim(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& s, const Vec& seed, int N,
                 bool record_jacobians) {
  const DiscreteSchedule dsched = discretize(sched, N);
  Flow flow;
  flow.seed = seed;
  flow.state = s;
  Vec a = seed;
  flow.times.push_back(dsched.step_time(N - 1));
  flow.states.push_back(a);
  for (int i = N - 1; i >= 0; --i) {
    if (record_jacobians) {
      flow.per_step_jacobians.push_back(
          step_jacobian_ddim(net, dsched, a, s, i));
    }
    a = ddim_step(net, dsched, a, s, i);
    check_finite(a, "sample_ddim", i);
    flow.times.push_back((i > 0) ? dsched.step_time(i - 1) : 0.0);
    flow.states.push_back(a);
  }
  return flow;
}

Flow sample_ddpm(const ScoreField& net, const NoiseSchedule& sched,
                 const Vec& s, const Vec& seed,
                 const std::vector<Vec>& noises, bool record_jacobians) {
  const int N = static_cast<int>(noises.size());
  if (N < 2) {
    throw std::invalid_argument("sample_ddpm: need one noise vector per step");
  }
  const DiscreteSchedule dsched = discretize(sched, N);
  Flow flow;
  flow.seed = seed;
  flow.state = s;
  flow.noises = noises;
  Vec a = seed;
  flow.times.push_back(dsched.step_time(N - 1));
  flow.states.push_back(a);
  for (int i = N - 1; i >= 0; --i) {
    if (record_jacobians) {
      flow.per_step_jacobians.push_back(
          step_jacobian_ddpm(net, dsched, a, s, i));
    }
    a = ddpm_step(net, dsched, a, s, i, noises[N - 1 - i]);
    check_finite(a, "sample_ddpm", i);
    flow.times.push_back((i > 0) ? dsched.step_time(i - 1) : 0.0);
    flow.states.push_back(a);
  }
  return flow;
}

Mat flow_jacobian(const std::vector<Mat>& per_step_jacobians) {
  if (per_step_jacobians.empty()) {
    throw std::invalid_argument("flow_jacobian: empty jacobian list");
  }
  const Eigen::Index d = per_step_jacobians.front().rows();
  Mat P = Mat::Identity(d, d);
  for (const Mat& J : per_step_jacobians) {
    if (J.rows() != d || J.cols() != d) {
      throw std::invalid_argument("flow_jacobian: dimension mismatch");
    }
    P = J * P;
  }
  return P;
}

Mat x0_prediction_jacobian(const ScoreField& net, const NoiseSchedule& sched,
                           const Vec& a, const Vec& s, double t) {
  const auto [al, sg] = sched.alpha_sigma(t);
  const int d = net.action_dim();
  return (Mat::Identity(d, d) - sg * net.epsilon_jacobian(a, s, t)) / al;
}

Mat expm(const Mat& M) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("expm: matrix must be square");
  }
  // Scaling and squaring with a Taylor series on the scaled matrix.
  const double nrm = M.norm();
  int squarings = 0;
  double scale = 1.0;
  while (nrm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Mat A = scale * M;
  Mat term = Mat::Identity(M.rows(), M.cols());
  Mat result = term;
  for (int k = 1; k <= 24; ++k) {
    term = (A * term) / static_cast<double>(k);
    result += term;
    if (term.norm() < 1e-18 * result.norm()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

GronwallResult gronwall_audit(const ScoreField& net,
                              const NoiseSchedule& sched, const Vec& s,
                              const Vec& seed, const Vec& delta0, int N) {
  if (N < 2) throw std::invalid_argument("gronwall_audit: N must be >= 2");
  if (std::abs(delta0.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("gronwall_audit: delta0 must be unit norm");
  }
  GronwallResult res;
  Flow& flow = res.flow;
  flow.seed = seed;
  flow.state = s;
  const double span = 1.0 - sched.t_eps;
  const double dtau = span / N;
  for (int k = 0; k <= N; ++k) {
    flow.times.push_back(1.0 - span * k / N);
  }

  // Traversed-time field: with tau = 1 - t, da/dtau = -F(a, t(tau)),
  // so the variational matrix is A = -J_F.
  Vec a = seed;
  Vec delta = delta0;
  flow.states.push_back(a);
  Mat A_here = -ode_jacobian(net, sched, a, s, flow.times[0]);
  double lam_here = exact_eigmax(sym(A_here));
  double integral = 0.0;
  for (int k = 0; k < N; ++k) {
    const double t = flow.times[k];
    Vec a_next = a + (flow.times[k + 1] - t) * ode_rhs(net, sched, a, s, t);
    check_finite(a_next, "gronwall_audit", k);
    const Mat A_next = -ode_jacobian(net, sched, a_next, s, flow.times[k + 1]);
    const double lam_next = exact_eigmax(sym(A_next));
    // Exponential midpoint for the variational system keeps the log-norm
    // bound exact per step: ||expm(B) delta|| <= exp(lambda_max(sym B))
    // ||delta|| and lambda_max(sym(.)) is convex, so the trapezoid
    // accumulator below always dominates.
    delta = expm(0.5 * dtau * (A_here + A_next)) * delta;
    integral += 0.5 * dtau * (lam_here + lam_next);
    a = a_next;
    A_here = A_next;
    lam_here = lam_next;
    flow.states.push_back(a);
  }

  res.record.integral = integral;
  res.record.bound_factor = std::exp(integral);
  res.record.c = 1.0;
  res.record.eta_effective = -integral / span;
  res.observed_ratio = delta.norm() / delta0.norm();
  return res;
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kEuler:
      return "euler";
    case SamplerKind::kDpm2m:
      return "dpm2m";
    case SamplerKind::kDdim:
      return "ddim";
    case SamplerKind::kDdpm:
      return "ddpm";
  }
  return "unknown";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "euler") return SamplerKind::kEuler;
  if (name == "dpm2m") return SamplerKind::kDpm2m;
  if (name == "ddim") return SamplerKind::kDdim;
  if (name == "ddpm") return SamplerKind::kDdpm;
  throw std::invalid_argument(
      "sampler.kind: unknown value '" + name +
      "' (expected euler, dpm2m, ddim or ddpm)");
}

Flow run_sampler(SamplerKind kind, const ScoreField& net,
                 const NoiseSchedule& sched, const Vec& s, const Vec& seed,
                 int steps, Rng& rng) {
  switch (kind) {
    case SamplerKind::kEuler:
      return sample_euler(net, sched, s, seed, steps);
    case SamplerKind::kDpm2m:
      return sample_dpm2m(net, sched, s, seed, steps);
    case SamplerKind::kDdim:
      return sample_ddim(net, sched, s, seed, steps);
    case SamplerKind::kDdpm: {
      std::vector<Vec> noises(steps);
      for (auto& xi : noises) xi = rng.normal_vec(net.action_dim());
      return sample_ddpm(net, sched, s, seed, noises);
    }
  }
  throw std::invalid_argument("run_sampler: bad sampler kind");
}

}  // namespace cdiff
