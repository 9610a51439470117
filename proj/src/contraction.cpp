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

#include "cdiff/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdiff {

std::string to_string(ContractionLossType type) {
  switch (type) {
    case ContractionLossType::kEigenHinge:
      return "eigen_hinge";
    case ContractionLossType::kFrobenius:
      return "frobenius";
  }
  return "unknown";
}

ContractionLossType contraction_loss_type_from_string(
    const std::string& name) {
  if (name == "eigen_hinge") return ContractionLossType::kEigenHinge;
  if (name == "frobenius") return ContractionLossType::kFrobenius;
  throw std::invalid_argument("contraction.loss_type: unknown value '" + name +
                              "' (expected eigen_hinge or frobenius)");
}

void ContractionConfig::validate() const {
  if (gamma < 0.0) {
    throw std::invalid_argument("contraction.gamma: must be >= 0");
  }
  if (beta <= 0.0) {
    throw std::invalid_argument("contraction.beta: must be > 0");
  }
  if (num_pi < 1 || num_pi > 64) {
    throw std::invalid_argument("contraction.num_pi: must be in [1, 64]");
  }
  if (contr_steps <= 0.0 || contr_steps > 1.0) {
    throw std::invalid_argument("contraction.contr_steps: must be in (0, 1]");
  }
}

std::pair<double, Vec> power_iteration(
    const std::function<Vec(const Vec&)>& matvec, int dim, int K, Rng& rng,
    Vec* v0_out) {
  if (dim < 1 || K < 1) {
    throw std::invalid_argument("power_iteration: dim and K must be >= 1");
  }
  constexpr int kMaxRestarts = 16;
  for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
    Vec v0 = rng.normal_vec(dim);
    const double n0 = v0.norm();
    if (n0 == 0.0) continue;
    v0 /= n0;
    Vec v = v0;
    bool dead = false;
    for (int k = 0; k < K; ++k) {
      Vec w = matvec(v);
      if (!w.allFinite()) {
        throw std::runtime_error("power_iteration: non-finite matvec output");
      }
      const double n = w.norm();
      if (n == 0.0) {
        dead = true;  // iterate landed in the kernel, restart
        break;
      }
      v = w / n;
    }
    if (dead) continue;
    Vec Jv = matvec(v);
    if (!Jv.allFinite()) {
      throw std::runtime_error("power_iteration: non-finite matvec output");
    }
    if (v0_out != nullptr) *v0_out = v0;
    return {v.dot(Jv), v};
  }
  throw std::runtime_error(
      "power_iteration: start vector kept hitting the kernel");
}

ContractionEstimate lambda_max_estimate(const Mat& J_sym, int K, Rng& rng) {
  if (J_sym.rows() != J_sym.cols()) {
    throw std::invalid_argument("lambda_max_estimate: matrix must be square");
  }
  const double mu = J_sym.norm() + 1e-6;
  auto matvec = [&](const Vec& v) -> Vec { return J_sym * v + mu * v; };
  auto [lam_shifted, v] =
      power_iteration(matvec, static_cast<int>(J_sym.rows()), K, rng);
  ContractionEstimate est;
  est.lambda_hat = lam_shifted - mu;
  est.shift_used = mu;
  est.iterations = K;
  est.eigenvector = std::move(v);
  return est;
}

EigenSystem jacobi_eigensystem(const Mat& J_sym) {
  const int n = static_cast<int>(J_sym.rows());
  if (J_sym.cols() != n) {
    throw std::invalid_argument("jacobi_eigensystem: matrix must be square");
  }
  if (n > 64) {
    throw std::invalid_argument("jacobi_eigensystem: dim must be <= 64");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(J_sym(i, j) - J_sym(j, i)) > 1e-9) {
        throw std::invalid_argument(
            "jacobi_eigensystem: input asymmetry exceeds 1e-9");
      }
    }
  }
  Mat A = sym(J_sym);
  Mat V = Mat::Identity(n, n);
  const double tol = 1e-12 * std::max(1.0, A.norm());
  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * A(i, j);
    }
    return std::sqrt(s);
  };
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        // Classic symmetric Schur decomposition of the 2x2 block.
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) +
                          std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- G^T A G and V <- V G for G = I with G(p,p)=G(q,q)=c,
        // G(p,q)=s, G(q,p)=-s.
        for (int i = 0; i < n; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  EigenSystem es;
  es.values.resize(n);
  es.vectors.resize(n, n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return A(i, i) > A(j, j); });
  for (int i = 0; i < n; ++i) {
    es.values[i] = A(order[i], order[i]);
    es.vectors.col(i) = V.col(order[i]);
  }
  return es;
}

double exact_eigmax(const Mat& J_sym) {
  return jacobi_eigensystem(J_sym).values[0];
}

double hinge_loss(double lambda_hat, double t, const NoiseSchedule& sched,
                  const ContractionConfig& cfg) {
  const double threshold = cfg.threshold_override
                               ? *cfg.threshold_override
                               : sched.contraction_threshold(t);
  return std::max(-cfg.beta, lambda_hat - threshold);
}

double frobenius_loss(const Mat& J_sym, double beta, Mat* dL_dJ) {
  if (J_sym.rows() != J_sym.cols()) {
    throw std::invalid_argument("frobenius_loss: matrix must be square");
  }
  const Mat shifted =
      J_sym + beta * Mat::Identity(J_sym.rows(), J_sym.cols());
  const double value = shifted.norm();
  if (dL_dJ != nullptr) {
    if (value > 0.0) {
      *dL_dJ = shifted / value;
    } else {
      *dL_dJ = Mat::Zero(J_sym.rows(), J_sym.cols());
    }
  }
  return value;
}

bool condition_check(const Mat& J, double t, const NoiseSchedule& sched,
                     std::optional<double> threshold_override) {
  const double threshold = threshold_override
                               ? *threshold_override
                               : sched.contraction_threshold(t);
  return exact_eigmax(sym(J)) < threshold;
}

double batch_contraction_loss(const ScoreField& net,
                              const std::vector<ContractionPoint>& batch,
                              const NoiseSchedule& sched,
                              const ContractionConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch.empty()) {
    throw std::invalid_argument("batch_contraction_loss: empty batch");
  }
  double total = 0.0;
  for (const auto& pt : batch) {
    if (pt.t > cfg.contr_steps) continue;
    const Mat J = sym(net.epsilon_jacobian(pt.a, pt.s, pt.t));
    if (cfg.loss_type == ContractionLossType::kEigenHinge) {
      const auto est = lambda_max_estimate(J, cfg.num_pi, rng);
      total += hinge_loss(est.lambda_hat, pt.t, sched, cfg);
    } else {
      total += frobenius_loss(J, cfg.beta);
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace cdiff
