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

#ifndef CDIFF_CONTRACTION_HPP_
#define CDIFF_CONTRACTION_HPP_

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdiff/network.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

enum class ContractionLossType { kEigenHinge, kFrobenius };

std::string to_string(ContractionLossType type);
ContractionLossType contraction_loss_type_from_string(const std::string& name);

struct ContractionConfig {
  double gamma = 0.1;
  double beta = 0.1;
  ContractionLossType loss_type = ContractionLossType::kFrobenius;
  int num_pi = 4;
  // Penalty applies only to samples with t <= contr_steps (lowest-t part of
  // the time axis).
  double contr_steps = 1.0;
  // Replaces the schedule threshold -f/h when set (variance-exploding
  // schedules need this).
  std::optional<double> threshold_override;

  // Throws std::invalid_argument if any field is out of range.
  void validate() const;
};

struct ContractionEstimate {
  double lambda_hat = 0.0;
  double shift_used = 0.0;
  int iterations = 0;
  double loss_value = 0.0;
  // Final power-iteration vector; the hinge gradient detaches it.
  Vec eigenvector;
};

// K normalized power-iteration steps followed by a Rayleigh quotient.
// Converges to the eigenvalue of largest magnitude. The matvec must be
// linear and symmetric. A zero iterate triggers a fresh start vector
// (bounded retries). If v0_out is non-null it receives the unit start
// vector actually used. Throws std::runtime_error on non-finite matvec
// output or if every retry hits a zero iterate.
std::pair<double, Vec> power_iteration(
    const std::function<Vec(const Vec&)>& matvec, int dim, int K, Rng& rng,
    Vec* v0_out = nullptr);

// Shifted power iteration on J_sym + mu*I with mu = ||J_sym||_F + 1e-6.
// Every eigenvalue of the shifted matrix is positive, so the dominant one
// in magnitude is the most positive and lambda_hat = lambda_shifted - mu
// targets lambda_max rather than the largest magnitude.
ContractionEstimate lambda_max_estimate(const Mat& J_sym, int K, Rng& rng);

struct EigenSystem {
  Vec values;   // descending
  Mat vectors;  // columns, matching values
};

// Cyclic Jacobi rotations to machine-level off-diagonal norm. Exact oracle
// for the estimators above; dim <= 64. Throws on asymmetry > 1e-9.
EigenSystem jacobi_eigensystem(const Mat& J_sym);
double exact_eigmax(const Mat& J_sym);

// max(-beta, lambda_hat + f/h); with threshold_override set, the term
// f/h = -threshold is replaced by -override. Zero gradient on the clamped
// branch.
double hinge_loss(double lambda_hat, double t, const NoiseSchedule& sched,
                  const ContractionConfig& cfg);

// ||J_sym + beta I||_F. If dL_dJ is non-null it receives the gradient
// (J_sym + beta I) / L, with the zero-subgradient convention at L = 0.
double frobenius_loss(const Mat& J_sym, double beta, Mat* dL_dJ = nullptr);

// Theorem-2 check: exact lambda_max(sym(J)) < -f/h (or < override).
bool condition_check(const Mat& J, double t, const NoiseSchedule& sched,
                     std::optional<double> threshold_override = std::nullopt);

struct ContractionPoint {
  Vec a;
  Vec s;
  double t = 0.0;
};

// Sum of per-sample losses over elements with t <= contr_steps, divided by
// the full batch size. Ungated elements contribute 0.
double batch_contraction_loss(const ScoreField& net,
                              const std::vector<ContractionPoint>& batch,
                              const NoiseSchedule& sched,
                              const ContractionConfig& cfg, Rng& rng);

}  // namespace cdiff

#endif  // CDIFF_CONTRACTION_HPP_
