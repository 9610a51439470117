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

#include <cmath>

#include "cdiff/network.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cdiff;

namespace {

NetworkConfig small_cfg(int d_a = 2, int hidden_layers = 2) {
  NetworkConfig cfg;
  cfg.d_a = d_a;
  cfg.d_s = 1;
  cfg.hidden_layers = hidden_layers;
  cfg.hidden_width = 6;
  cfg.time_embed_dim = 4;
  return cfg;
}

Vec some_state(int d_s) { return Vec::Constant(d_s, 0.3); }

}  // namespace

TEST_CASE("sym extracts the symmetric part") {
  Mat J(2, 2);
  J << 1.0, 4.0, 2.0, 3.0;
  const Mat S = sym(J);
  CHECK(S(0, 1) == doctest::Approx(3.0));
  CHECK(S(1, 0) == doctest::Approx(3.0));
  CHECK(S(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sym(Mat::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("parameter count matches the documented layout") {
  NetworkConfig cfg = small_cfg();
  const int n_in = cfg.d_a + cfg.d_s + cfg.time_embed_dim;
  const int H = cfg.hidden_width;
  ScoreNetwork net(cfg);
  // W1 + b1, then (W2, U2, b2), then output.
  const size_t expected = H * n_in + H + (H * H + H * n_in + H) +
                          cfg.d_a * H + cfg.d_a;
  CHECK(net.param_count() == expected);

  cfg.hidden_layers = 0;
  ScoreNetwork affine(cfg);
  CHECK(affine.param_count() == static_cast<size_t>(cfg.d_a * n_in + cfg.d_a));
}

TEST_CASE("affine network computes W x + b exactly") {
  NetworkConfig cfg = small_cfg(2, 0);
  ScoreNetwork net(cfg);
  const int n_in = net.input_width();
  auto& p = net.params();
  for (size_t i = 0; i < p.size(); ++i) p[i] = 0.01 * (i + 1);

  Vec a(2), s = some_state(1);
  a << 0.7, -0.3;
  const double t = 0.5;
  Vec x0(n_in);
  x0.head(2) = a;
  x0[2] = s[0];
  x0.tail(cfg.time_embed_dim) = net.time_features(t);

  Mat W(2, n_in);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < n_in; ++c) W(r, c) = p[r * n_in + c];
  }
  Vec b(2);
  b << p[2 * n_in], p[2 * n_in + 1];
  CHECK((net.epsilon(a, s, t) - (W * x0 + b)).norm() < 1e-14);
  // Jacobian w.r.t. a is the leading block of W.
  CHECK(testutil::max_abs_diff(net.epsilon_jacobian(a, s, t),
                               W.leftCols(2)) < 1e-14);
}

TEST_CASE("time features are sinusoidal pairs") {
  ScoreNetwork net(small_cfg());
  const Vec f = net.time_features(0.37);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == doctest::Approx(std::sin(M_PI * 0.37)));
  CHECK(f[1] == doctest::Approx(std::cos(M_PI * 0.37)));
  CHECK(f[2] == doctest::Approx(std::sin(2.0 * M_PI * 0.37)));
  CHECK(f[3] == doctest::Approx(std::cos(2.0 * M_PI * 0.37)));

  NetworkConfig bad = small_cfg();
  bad.time_embed_dim = 3;
  CHECK_THROWS_AS(ScoreNetwork{bad}, std::invalid_argument);
}

TEST_CASE("input dimension mismatches are rejected") {
  ScoreNetwork net = testutil::random_net(small_cfg(), 1);
  CHECK_THROWS_AS(net.epsilon(Vec::Zero(3), some_state(1), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.epsilon(Vec::Zero(2), Vec::Zero(2), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.jvp(Vec::Zero(2), some_state(1), 0.5, Vec::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.vjp(Vec::Zero(2), some_state(1), 0.5, Vec::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("jacobian matches finite differences over random nets") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    for (int layers : {0, 1, 3}) {
      for (int d_a : {1, 2}) {
        ScoreNetwork net = testutil::random_net(small_cfg(d_a, layers), seed);
        Rng rng(seed + 100);
        const Vec a = rng.normal_vec(d_a);
        const Vec s = rng.normal_vec(1);
        const double t = rng.uniform(0.05, 0.95);
        const Mat J = net.epsilon_jacobian(a, s, t);
        const Mat J_fd = testutil::fd_jacobian(
            [&](const Vec& x) { return net.epsilon(x, s, t); }, a);
        CHECK(testutil::max_abs_diff(J, J_fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("jvp and vjp agree with the dense jacobian") {
  ScoreNetwork net = testutil::random_net(small_cfg(2, 3), 7);
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    const Vec a = rng.normal_vec(2);
    const Vec s = rng.normal_vec(1);
    const double t = rng.uniform(0.05, 0.95);
    const Vec v = rng.normal_vec(2);
    const Vec u = rng.normal_vec(2);
    const Mat J = net.epsilon_jacobian(a, s, t);
    Vec value;
    CHECK((net.jvp(a, s, t, v, &value) - J * v).norm() < 1e-12);
    CHECK((value - net.epsilon(a, s, t)).norm() == 0.0);
    CHECK((net.vjp(a, s, t, u) - J.transpose() * u).norm() < 1e-12);
  }
}

TEST_CASE("parameter gradient of a first-order scalar matches FD") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    ScoreNetwork net = testutil::random_net(small_cfg(2, 2), seed);
    Rng rng(seed + 31);
    const Vec a = rng.normal_vec(2);
    const Vec s = rng.normal_vec(1);
    const Vec c = rng.normal_vec(2);
    const double t = 0.41;

    std::vector<double> grad(net.param_count(), 0.0);
    net.accumulate_gradient(a, s, t, &c, {}, grad);

    ScoreNetwork probe(net.config());
    const auto fd = testutil::fd_param_gradient(
        [&](const std::vector<double>& p) {
          probe.params() = p;
          return c.dot(probe.epsilon(a, s, t));
        },
        net.params());
    for (size_t i = 0; i < grad.size(); ++i) {
      CHECK(std::abs(grad[i] - fd[i]) < 1e-6);
    }
  }
}

TEST_CASE("parameter gradient through jacobian entries matches FD") {
  // The scalar sum_k c_k^T (J_eps v_k) exercises the forward-over-reverse
  // second-order path.
  for (uint64_t seed = 0; seed < 5; ++seed) {
    ScoreNetwork net = testutil::random_net(small_cfg(2, 2), seed);
    Rng rng(seed + 77);
    const Vec a = rng.normal_vec(2);
    const Vec s = rng.normal_vec(1);
    const double t = 0.63;
    std::vector<TangentCotangent> pairs;
    pairs.push_back({rng.normal_vec(2), rng.normal_vec(2)});
    pairs.push_back({rng.normal_vec(2), rng.normal_vec(2)});

    std::vector<double> grad(net.param_count(), 0.0);
    net.accumulate_gradient(a, s, t, nullptr, pairs, grad);

    ScoreNetwork probe(net.config());
    const auto fd = testutil::fd_param_gradient(
        [&](const std::vector<double>& p) {
          probe.params() = p;
          double sum = 0.0;
          for (const auto& pr : pairs) {
            sum += pr.cotangent.dot(probe.jvp(a, s, t, pr.direction));
          }
          return sum;
        },
        net.params());
    for (size_t i = 0; i < grad.size(); ++i) {
      CHECK(std::abs(grad[i] - fd[i]) < 5e-6);
    }
  }
}

TEST_CASE("gradient accumulation adds instead of overwriting") {
  ScoreNetwork net = testutil::random_net(small_cfg(1, 1), 3);
  const Vec a = Vec::Constant(1, 0.2);
  const Vec s = some_state(1);
  const Vec c = Vec::Constant(1, 1.0);
  std::vector<double> once(net.param_count(), 0.0);
  net.accumulate_gradient(a, s, 0.5, &c, {}, once);
  std::vector<double> twice(net.param_count(), 0.0);
  net.accumulate_gradient(a, s, 0.5, &c, {}, twice);
  net.accumulate_gradient(a, s, 0.5, &c, {}, twice);
  for (size_t i = 0; i < once.size(); ++i) {
    CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
  }
}

TEST_CASE("zeroed final layer gives the zero field") {
  ScoreNetwork net = testutil::random_net(small_cfg(2, 2), 9);
  net.zero_final_layer();
  Rng rng(5);
  const Vec a = rng.normal_vec(2);
  CHECK(net.epsilon(a, some_state(1), 0.5).norm() == 0.0);
  CHECK(net.epsilon_jacobian(a, some_state(1), 0.5).norm() == 0.0);
}

TEST_CASE("initialization is deterministic in the seed") {
  ScoreNetwork a = testutil::random_net(small_cfg(), 42);
  ScoreNetwork b = testutil::random_net(small_cfg(), 42);
  ScoreNetwork c = testutil::random_net(small_cfg(), 43);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
}
