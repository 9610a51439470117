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

#ifndef CDIFF_TOYWORLD_HPP_
#define CDIFF_TOYWORLD_HPP_

#include <string>
#include <utility>
#include <vector>

#include "cdiff/network.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

// Conditional Gaussian-mixture action distribution p(a|s) with diagonal
// covariances. Everything downstream of it has a closed form under the VP
// forward kernel, which makes it the oracle layer for end-to-end tests.
struct GmmComponent {
  double weight = 1.0;
  Vec mean;
  Vec cov_diag;
};

struct GmmState {
  double weight = 1.0;
  Vec s;
  std::vector<GmmComponent> components;
};

struct GmmTask {
  int d_a = 0;
  int d_s = 0;
  std::vector<GmmState> states;

  // Throws std::invalid_argument on bad weights, dims or covariances.
  void validate() const;
  // Nearest conditioning state by Euclidean distance.
  const GmmState& find_state(const Vec& s) const;
};

// Line-based task file: "dims <d_a> <d_s>", then per state
// "state <weight> <s...>" followed by its
// "component <weight> <mean...> <cov_diag...>" lines. '#' starts a comment.
GmmTask load_task(const std::string& path);
GmmTask parse_task(const std::string& text);
std::string format_task(const GmmTask& task);

// Draws s by state weight, a component by w_k, then a0 ~ N(mu_k, Sigma_k).
std::pair<Vec, Vec> sample_pair(const GmmTask& task, Rng& rng);

// Perturbed marginal p_t(a|s) = sum_k w_k N(alpha mu_k, alpha^2 Sigma_k +
// sigma^2 I) and its derivatives, all exact.
double log_pt(const GmmTask& task, const NoiseSchedule& sched, const Vec& a,
              const Vec& s, double t);
Vec oracle_score(const GmmTask& task, const NoiseSchedule& sched, const Vec& a,
                 const Vec& s, double t);
Mat oracle_score_jacobian(const GmmTask& task, const NoiseSchedule& sched,
                          const Vec& a, const Vec& s, double t);

// eps* = -sigma_t * score; the Bayes-optimal noise predictor.
Vec oracle_epsilon(const GmmTask& task, const NoiseSchedule& sched,
                   const Vec& a, const Vec& s, double t);
Mat oracle_epsilon_jacobian(const GmmTask& task, const NoiseSchedule& sched,
                            const Vec& a, const Vec& s, double t);

// Unbiased pairwise E-statistic 2E||X-Y|| - E||X-X'|| - E||Y-Y'||.
// Throws on empty input.
double energy_distance(const std::vector<Vec>& A, const std::vector<Vec>& B);

// Adapter so samplers and diagnostics can run against the analytic field.
class OracleEpsilonField : public ScoreField {
 public:
  OracleEpsilonField(GmmTask task, NoiseSchedule sched)
      : task_(std::move(task)), sched_(sched) {}

  int action_dim() const override { return task_.d_a; }
  Vec epsilon(const Vec& a, const Vec& s, double t) const override {
    return oracle_epsilon(task_, sched_, a, s, t);
  }
  Mat epsilon_jacobian(const Vec& a, const Vec& s, double t) const override {
    return oracle_epsilon_jacobian(task_, sched_, a, s, t);
  }
  const GmmTask& task() const { return task_; }

 private:
  GmmTask task_;
  NoiseSchedule sched_;
};

}  // namespace cdiff

#endif  // CDIFF_TOYWORLD_HPP_
