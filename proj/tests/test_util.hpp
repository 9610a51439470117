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

#ifndef CDIFF_TESTS_TEST_UTIL_HPP_
#define CDIFF_TESTS_TEST_UTIL_HPP_

#include <functional>

#include "cdiff/network.hpp"
#include "cdiff/rng.hpp"

namespace cdiff::testutil {

// Central finite differences, the independent oracle for every analytic
// derivative in the library.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                       double h = 1e-6) {
  const Vec y0 = f(x);
  Mat J(y0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

inline std::vector<double> fd_param_gradient(
    const std::function<double(const std::vector<double>&)>& loss,
    std::vector<double> params, double h = 1e-6) {
  std::vector<double> grad(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = loss(params);
    params[i] = orig - h;
    const double down = loss(params);
    params[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline ScoreNetwork random_net(const NetworkConfig& cfg, uint64_t seed) {
  ScoreNetwork net(cfg);
  Rng rng(seed);
  net.init_random(rng);
  return net;
}

inline double max_abs_diff(const Mat& A, const Mat& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

inline double rel_diff(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

}  // namespace cdiff::testutil

#endif  // CDIFF_TESTS_TEST_UTIL_HPP_
