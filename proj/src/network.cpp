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

#include "cdiff/network.hpp"

#include <cmath>
#include <stdexcept>

namespace cdiff {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Vec>;
using ConstMapVec = Eigen::Map<const Vec>;
}  // namespace

Mat sym(const Mat& J) {
  if (J.rows() != J.cols()) {
    throw std::invalid_argument("sym: matrix must be square");
  }
  return 0.5 * (J + J.transpose());
}

struct ScoreNetwork::Trace {
  Vec x0;
  std::vector<Vec> h;  // post-activation per hidden block
  Vec y;
};

struct ScoreNetwork::TangentTrace {
  Vec xdot0;
  std::vector<Vec> zdot;  // pre-activation tangents per hidden block
  std::vector<Vec> hdot;
  Vec ydot;
};

ScoreNetwork::ScoreNetwork(const NetworkConfig& cfg) : cfg_(cfg) {
  if (cfg_.d_a < 1 || cfg_.d_s < 0) {
    throw std::invalid_argument("network: d_a must be >= 1 and d_s >= 0");
  }
  if (cfg_.time_embed_dim % 2 != 0 || cfg_.time_embed_dim < 0) {
    throw std::invalid_argument(
        "network.time_embed_dim: must be even and non-negative");
  }
  if (cfg_.hidden_layers > 0 && cfg_.hidden_width < 1) {
    throw std::invalid_argument("network.hidden_width: must be >= 1");
  }
  n_in_ = cfg_.d_a + cfg_.d_s + cfg_.time_embed_dim;

  size_t off = 0;
  const int H = cfg_.hidden_width;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    LayerOffsets lo;
    lo.rows = H;
    lo.w_cols = (l == 0) ? n_in_ : H;
    lo.u_cols = (l == 0) ? 0 : n_in_;
    lo.w = off;
    off += static_cast<size_t>(lo.rows) * lo.w_cols;
    lo.u = off;
    off += static_cast<size_t>(lo.rows) * lo.u_cols;
    lo.b = off;
    off += lo.rows;
    hidden_.push_back(lo);
  }
  out_.rows = cfg_.d_a;
  out_.w_cols = (cfg_.hidden_layers > 0) ? H : n_in_;
  out_.u_cols = 0;
  out_.w = off;
  off += static_cast<size_t>(out_.rows) * out_.w_cols;
  out_.b = off;
  off += out_.rows;

  params_.assign(off, 0.0);
}

void ScoreNetwork::init_random(Rng& rng) {
  auto xavier = [&](const LayerOffsets& lo) {
    const int fan_in = lo.w_cols + lo.u_cols;
    const double limit = std::sqrt(6.0 / (fan_in + lo.rows));
    for (size_t i = 0; i < static_cast<size_t>(lo.rows) * lo.w_cols; ++i) {
      params_[lo.w + i] = rng.uniform(-limit, limit);
    }
    for (size_t i = 0; i < static_cast<size_t>(lo.rows) * lo.u_cols; ++i) {
      params_[lo.u + i] = rng.uniform(-limit, limit);
    }
    for (int i = 0; i < lo.rows; ++i) params_[lo.b + i] = 0.0;
  };
  for (const auto& lo : hidden_) xavier(lo);
  xavier(out_);
}

void ScoreNetwork::zero_final_layer() {
  const size_t n = static_cast<size_t>(out_.rows) * out_.w_cols + out_.rows;
  for (size_t i = 0; i < n; ++i) params_[out_.w + i] = 0.0;
}

Vec ScoreNetwork::time_features(double t) const {
  Vec f(cfg_.time_embed_dim);
  double freq = M_PI;
  for (int k = 0; k < cfg_.time_embed_dim / 2; ++k) {
    f[2 * k] = std::sin(freq * t);
    f[2 * k + 1] = std::cos(freq * t);
    freq *= 2.0;
  }
  return f;
}

Vec ScoreNetwork::assemble_input(const Vec& a, const Vec& s, double t) const {
  if (a.size() != cfg_.d_a || s.size() != cfg_.d_s) {
    throw std::invalid_argument("network: input dimension mismatch");
  }
  Vec x0(n_in_);
  x0.head(cfg_.d_a) = a;
  x0.segment(cfg_.d_a, cfg_.d_s) = s;
  if (cfg_.time_embed_dim > 0) {
    x0.tail(cfg_.time_embed_dim) = time_features(t);
  }
  return x0;
}

void ScoreNetwork::forward_trace(const Vec& x0, Trace& tr) const {
  tr.x0 = x0;
  tr.h.clear();
  const Vec* prev = &tr.x0;
  for (const auto& lo : hidden_) {
    ConstMapMat W(params_.data() + lo.w, lo.rows, lo.w_cols);
    ConstMapVec b(params_.data() + lo.b, lo.rows);
    Vec z = W * (*prev) + b;
    if (lo.u_cols > 0) {
      ConstMapMat U(params_.data() + lo.u, lo.rows, lo.u_cols);
      z += U * tr.x0;
    }
    tr.h.push_back(z.array().tanh().matrix());
    prev = &tr.h.back();
  }
  ConstMapMat Wo(params_.data() + out_.w, out_.rows, out_.w_cols);
  ConstMapVec bo(params_.data() + out_.b, out_.rows);
  tr.y = Wo * (*prev) + bo;
}

void ScoreNetwork::tangent_trace(const Trace& tr, const Vec& xdot0,
                                 TangentTrace& tt) const {
  tt.xdot0 = xdot0;
  tt.zdot.clear();
  tt.hdot.clear();
  const Vec* prevdot = &tt.xdot0;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    const auto& lo = hidden_[l];
    ConstMapMat W(params_.data() + lo.w, lo.rows, lo.w_cols);
    Vec zdot = W * (*prevdot);
    if (lo.u_cols > 0) {
      ConstMapMat U(params_.data() + lo.u, lo.rows, lo.u_cols);
      zdot += U * tt.xdot0;
    }
    const Vec& h = tr.h[l];
    tt.zdot.push_back(zdot);
    tt.hdot.push_back(
        ((1.0 - h.array().square()) * zdot.array()).matrix());
    prevdot = &tt.hdot.back();
  }
  ConstMapMat Wo(params_.data() + out_.w, out_.rows, out_.w_cols);
  tt.ydot = Wo * (*prevdot);
}

void ScoreNetwork::reverse_pass(const Trace& tr, const TangentTrace* tt,
                                const Vec& ybar, const Vec* ydotbar,
                                std::vector<double>* grad, Vec* x0bar) const {
  const bool second_order = (tt != nullptr && ydotbar != nullptr);
  const Vec& out_in = hidden_.empty() ? tr.x0 : tr.h.back();

  if (grad != nullptr) {
    MapMat Wo_bar(grad->data() + out_.w, out_.rows, out_.w_cols);
    MapVec bo_bar(grad->data() + out_.b, out_.rows);
    Wo_bar += ybar * out_in.transpose();
    bo_bar += ybar;
    if (second_order) {
      const Vec& out_in_dot =
          hidden_.empty() ? tt->xdot0 : tt->hdot.back();
      Wo_bar += (*ydotbar) * out_in_dot.transpose();
    }
  }

  ConstMapMat Wo(params_.data() + out_.w, out_.rows, out_.w_cols);
  Vec hbar = Wo.transpose() * ybar;
  Vec hdotbar;
  if (second_order) hdotbar = Wo.transpose() * (*ydotbar);

  if (hidden_.empty()) {
    if (x0bar != nullptr) *x0bar += hbar;
    return;
  }

  for (int l = static_cast<int>(hidden_.size()) - 1; l >= 0; --l) {
    const auto& lo = hidden_[l];
    const Vec& h = tr.h[l];
    const Eigen::ArrayXd d = 1.0 - h.array().square();

    Vec zbar = (d * hbar.array()).matrix();
    Vec zdotbar;
    if (second_order) {
      // d/dz of hdot = (1 - tanh(z)^2) zdot is -2 tanh(z)(1 - tanh(z)^2) zdot.
      zbar += (-2.0 * h.array() * d * tt->zdot[l].array() * hdotbar.array())
                  .matrix();
      zdotbar = (d * hdotbar.array()).matrix();
    }

    const Vec& prev_in = (l > 0) ? tr.h[l - 1] : tr.x0;
    if (grad != nullptr) {
      MapMat W_bar(grad->data() + lo.w, lo.rows, lo.w_cols);
      MapVec b_bar(grad->data() + lo.b, lo.rows);
      W_bar += zbar * prev_in.transpose();
      b_bar += zbar;
      if (lo.u_cols > 0) {
        MapMat U_bar(grad->data() + lo.u, lo.rows, lo.u_cols);
        U_bar += zbar * tr.x0.transpose();
      }
      if (second_order) {
        const Vec& prev_in_dot = (l > 0) ? tt->hdot[l - 1] : tt->xdot0;
        W_bar += zdotbar * prev_in_dot.transpose();
        if (lo.u_cols > 0) {
          MapMat U_bar(grad->data() + lo.u, lo.rows, lo.u_cols);
          U_bar += zdotbar * tt->xdot0.transpose();
        }
      }
    }

    ConstMapMat W(params_.data() + lo.w, lo.rows, lo.w_cols);
    if (x0bar != nullptr && lo.u_cols > 0) {
      ConstMapMat U(params_.data() + lo.u, lo.rows, lo.u_cols);
      *x0bar += U.transpose() * zbar;
    }
    if (l > 0) {
      hbar = W.transpose() * zbar;
      if (second_order) hdotbar = W.transpose() * zdotbar;
    } else {
      if (x0bar != nullptr) *x0bar += W.transpose() * zbar;
    }
  }
}

Vec ScoreNetwork::epsilon(const Vec& a, const Vec& s, double t) const {
  Trace tr;
  forward_trace(assemble_input(a, s, t), tr);
  return tr.y;
}

Vec ScoreNetwork::jvp(const Vec& a, const Vec& s, double t, const Vec& v,
                      Vec* value) const {
  if (v.size() != cfg_.d_a) {
    throw std::invalid_argument("jvp: direction must have d_a entries");
  }
  Trace tr;
  forward_trace(assemble_input(a, s, t), tr);
  Vec xdot0 = Vec::Zero(n_in_);
  xdot0.head(cfg_.d_a) = v;
  TangentTrace tt;
  tangent_trace(tr, xdot0, tt);
  if (value != nullptr) *value = tr.y;
  return tt.ydot;
}

Mat ScoreNetwork::epsilon_jacobian(const Vec& a, const Vec& s,
                                   double t) const {
  Trace tr;
  forward_trace(assemble_input(a, s, t), tr);
  Mat J(cfg_.d_a, cfg_.d_a);
  TangentTrace tt;
  for (int j = 0; j < cfg_.d_a; ++j) {
    Vec xdot0 = Vec::Zero(n_in_);
    xdot0[j] = 1.0;
    tangent_trace(tr, xdot0, tt);
    J.col(j) = tt.ydot;
  }
  return J;
}

Vec ScoreNetwork::vjp(const Vec& a, const Vec& s, double t,
                      const Vec& cotangent) const {
  if (cotangent.size() != cfg_.d_a) {
    throw std::invalid_argument("vjp: cotangent must have d_a entries");
  }
  Trace tr;
  forward_trace(assemble_input(a, s, t), tr);
  Vec x0bar = Vec::Zero(n_in_);
  reverse_pass(tr, nullptr, cotangent, nullptr, nullptr, &x0bar);
  return x0bar.head(cfg_.d_a);
}

void ScoreNetwork::accumulate_gradient(
    const Vec& a, const Vec& s, double t, const Vec* value_cotangent,
    const std::vector<TangentCotangent>& tangents,
    std::vector<double>& grad) const {
  if (grad.size() != params_.size()) {
    throw std::invalid_argument("accumulate_gradient: grad size mismatch");
  }
  Trace tr;
  forward_trace(assemble_input(a, s, t), tr);

  if (value_cotangent != nullptr) {
    reverse_pass(tr, nullptr, *value_cotangent, nullptr, &grad, nullptr);
  }
  const Vec zero_ybar = Vec::Zero(cfg_.d_a);
  TangentTrace tt;
  for (const auto& pair : tangents) {
    if (pair.direction.size() != cfg_.d_a ||
        pair.cotangent.size() != cfg_.d_a) {
      throw std::invalid_argument(
          "accumulate_gradient: tangent pair dimension mismatch");
    }
    Vec xdot0 = Vec::Zero(n_in_);
    xdot0.head(cfg_.d_a) = pair.direction;
    tangent_trace(tr, xdot0, tt);
    reverse_pass(tr, &tt, zero_ybar, &pair.cotangent, &grad, nullptr);
  }
}

}  // namespace cdiff
