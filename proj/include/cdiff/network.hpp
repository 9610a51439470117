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

#ifndef CDIFF_NETWORK_HPP_
#define CDIFF_NETWORK_HPP_

#include <cstddef>
#include <vector>

#include "cdiff/rng.hpp"

namespace cdiff {

// Symmetric part (J + J^T)/2. Throws on non-square input.
Mat sym(const Mat& J);

// A conditional noise-prediction field eps(a, s, t). Implemented by the
// trainable network and by the analytic task oracles, so samplers and
// diagnostics run identically against either.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual int action_dim() const = 0;
  virtual Vec epsilon(const Vec& a, const Vec& s, double t) const = 0;
  // d eps / d a, a (d_a x d_a) matrix.
  virtual Mat epsilon_jacobian(const Vec& a, const Vec& s, double t) const = 0;
};

// The constant zero field. Handy baseline: the reverse ODE reduces to its
// linear drift.
class ZeroField : public ScoreField {
 public:
  explicit ZeroField(int d_a) : d_a_(d_a) {}
  int action_dim() const override { return d_a_; }
  Vec epsilon(const Vec&, const Vec&, double) const override {
    return Vec::Zero(d_a_);
  }
  Mat epsilon_jacobian(const Vec&, const Vec&, double) const override {
    return Mat::Zero(d_a_, d_a_);
  }

 private:
  int d_a_;
};

struct NetworkConfig {
  int d_a = 1;
  int d_s = 1;
  int hidden_layers = 3;   // 0 gives a purely affine map
  int hidden_width = 128;
  int time_embed_dim = 16;  // sinusoidal features, must be even
};

// Direction/cotangent pair for differentiating through Jacobian entries:
// contributes cotangent^T (J_eps * direction) to the scalar being
// differentiated with respect to parameters.
struct TangentCotangent {
  Vec direction;
  Vec cotangent;
};

// Dense tanh MLP eps(a, s, t) with an input skip into every hidden block
// and exact first- and second-order derivative machinery. Input is
// concat(a, s, sinusoidal_time_features(t)); output is d_a wide.
//
// Parameters live in one flat row-major array so optimizers, EMA, finite
// differences and checkpoints all see the same layout:
//   W1 (H x n_in), b1 (H),
//   then per extra hidden block l: Wl (H x H), Ul (H x n_in), bl (H),
//   then Wo (d_a x H), bo (d_a).
// With hidden_layers == 0 the layout is just Wo (d_a x n_in), bo (d_a).
class ScoreNetwork : public ScoreField {
 public:
  explicit ScoreNetwork(const NetworkConfig& cfg);

  const NetworkConfig& config() const { return cfg_; }
  int action_dim() const override { return cfg_.d_a; }
  int input_width() const { return n_in_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  size_t param_count() const { return params_.size(); }

  void init_random(Rng& rng);
  void zero_final_layer();

  Vec epsilon(const Vec& a, const Vec& s, double t) const override;

  // Exact d eps/d a assembled from d_a forward-mode passes.
  Mat epsilon_jacobian(const Vec& a, const Vec& s, double t) const override;

  // Forward-mode J_eps * v in one tangent pass. If value is non-null it
  // receives eps(a, s, t) from the shared primal pass.
  Vec jvp(const Vec& a, const Vec& s, double t, const Vec& v,
          Vec* value = nullptr) const;

  // Reverse-mode J_eps^T * cotangent (derivative w.r.t. the action input).
  Vec vjp(const Vec& a, const Vec& s, double t, const Vec& cotangent) const;

  // Accumulates into grad the parameter gradient of the scalar
  //   value_cotangent^T eps  +  sum_k cotangent_k^T (J_eps direction_k),
  // i.e. any scalar built from the output and input-Jacobian entries.
  // Second-order terms are computed forward-over-reverse. grad must have
  // param_count() entries.
  void accumulate_gradient(const Vec& a, const Vec& s, double t,
                           const Vec* value_cotangent,
                           const std::vector<TangentCotangent>& tangents,
                           std::vector<double>& grad) const;

  Vec time_features(double t) const;

 private:
  struct Trace;
  struct TangentTrace;

  Vec assemble_input(const Vec& a, const Vec& s, double t) const;
  void forward_trace(const Vec& x0, Trace& tr) const;
  void tangent_trace(const Trace& tr, const Vec& xdot0, TangentTrace& tt) const;
  // Reverse pass; tangent may be null (first-order only). If grad is null
  // only x0bar is produced; if x0bar is null only grad is accumulated.
  void reverse_pass(const Trace& tr, const TangentTrace* tt, const Vec& ybar,
                    const Vec* ydotbar, std::vector<double>* grad,
                    Vec* x0bar) const;

  NetworkConfig cfg_;
  int n_in_ = 0;
  std::vector<double> params_;

  // Flat offsets per block, mirroring the layout documented above.
  struct LayerOffsets {
    size_t w = 0, u = 0, b = 0;
    int rows = 0, w_cols = 0, u_cols = 0;  // u_cols == 0 means no skip term
  };
  std::vector<LayerOffsets> hidden_;
  LayerOffsets out_;
};

}  // namespace cdiff

#endif  // CDIFF_NETWORK_HPP_
