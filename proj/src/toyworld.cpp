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

#include "cdiff/toyworld.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cdiff {

namespace {

constexpr double kWeightTol = 1e-9;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Log densities and responsibilities of the perturbed mixture at (a, s, t).
// d_k = alpha^2 Sigma_k + sigma^2 I stays diagonal.
struct MixtureEval {
  std::vector<double> resp;
  std::vector<Vec> inv_d;     // per component, elementwise 1/d_k
  std::vector<Vec> comp_score;  // g_k = -inv_d .* (a - alpha mu_k)
  double log_p = 0.0;
};

MixtureEval eval_mixture(const GmmState& st, const NoiseSchedule& sched,
                         const Vec& a, double t) {
  const auto [alpha, sigma] = sched.alpha_sigma(t);
  const size_t K = st.components.size();
  MixtureEval ev;
  ev.resp.resize(K);
  ev.inv_d.resize(K);
  ev.comp_score.resize(K);
  std::vector<double> log_terms(K);
  double max_term = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < K; ++k) {
    const auto& c = st.components[k];
    const Vec d =
        (alpha * alpha * c.cov_diag.array() + sigma * sigma).matrix();
    ev.inv_d[k] = d.cwiseInverse();
    const Vec r = a - alpha * c.mean;
    ev.comp_score[k] = -(ev.inv_d[k].array() * r.array()).matrix();
    const double quad = (r.array().square() * ev.inv_d[k].array()).sum();
    const double log_det = d.array().log().sum();
    log_terms[k] = std::log(c.weight) -
                   0.5 * (quad + log_det +
                          a.size() * std::log(2.0 * M_PI));
    max_term = std::max(max_term, log_terms[k]);
  }
  double denom = 0.0;
  for (size_t k = 0; k < K; ++k) {
    ev.resp[k] = std::exp(log_terms[k] - max_term);
    denom += ev.resp[k];
  }
  for (size_t k = 0; k < K; ++k) ev.resp[k] /= denom;
  ev.log_p = max_term + std::log(denom);
  return ev;
}

}  // namespace

void GmmTask::validate() const {
  if (d_a < 1 || d_s < 0) {
    throw std::invalid_argument("task: d_a must be >= 1 and d_s >= 0");
  }
  if (states.empty()) {
    throw std::invalid_argument("task: at least one state required");
  }
  double state_sum = 0.0;
  for (const auto& st : states) {
    if (st.weight < 0.0) {
      throw std::invalid_argument("task: state weight must be >= 0");
    }
    state_sum += st.weight;
    if (st.s.size() != d_s) {
      throw std::invalid_argument("task: state vector has wrong dimension");
    }
    if (st.components.empty()) {
      throw std::invalid_argument("task: state with no components");
    }
    double comp_sum = 0.0;
    for (const auto& c : st.components) {
      if (c.weight <= 0.0) {
        throw std::invalid_argument("task: component weight must be > 0");
      }
      comp_sum += c.weight;
      if (c.mean.size() != d_a || c.cov_diag.size() != d_a) {
        throw std::invalid_argument("task: component has wrong dimension");
      }
      if ((c.cov_diag.array() <= 0.0).any()) {
        throw std::invalid_argument("task: covariance entries must be > 0");
      }
    }
    if (std::abs(comp_sum - 1.0) > kWeightTol) {
      throw std::invalid_argument("task: component weights must sum to 1");
    }
  }
  if (std::abs(state_sum - 1.0) > kWeightTol) {
    throw std::invalid_argument("task: state weights must sum to 1");
  }
}

const GmmState& GmmTask::find_state(const Vec& s) const {
  const GmmState* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& st : states) {
    const double d = (st.s - s).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = &st;
    }
  }
  return *best;
}

GmmTask parse_task(const std::string& text) {
  GmmTask task;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_dims = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& what) {
      throw std::invalid_argument("task file line " + std::to_string(line_no) +
                                  ": " + what);
    };
    auto read_vec = [&](int n) {
      Vec v(n);
      for (int i = 0; i < n; ++i) {
        if (!(ls >> v[i])) fail("expected " + std::to_string(n) + " numbers");
      }
      return v;
    };
    if (key == "dims") {
      if (!(ls >> task.d_a >> task.d_s)) fail("dims needs d_a and d_s");
      have_dims = true;
    } else if (key == "state") {
      if (!have_dims) fail("dims must come first");
      GmmState st;
      if (!(ls >> st.weight)) fail("state needs a weight");
      st.s = read_vec(task.d_s);
      task.states.push_back(std::move(st));
    } else if (key == "component") {
      if (task.states.empty()) fail("component before any state");
      GmmComponent c;
      if (!(ls >> c.weight)) fail("component needs a weight");
      c.mean = read_vec(task.d_a);
      c.cov_diag = read_vec(task.d_a);
      task.states.back().components.push_back(std::move(c));
    } else {
      fail("unknown directive '" + key + "'");
    }
  }
  task.validate();
  return task;
}

GmmTask load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("task file not found: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_task(ss.str());
}

std::string format_task(const GmmTask& task) {
  std::ostringstream out;
  out << "dims " << task.d_a << " " << task.d_s << "\n";
  for (const auto& st : task.states) {
    out << "state " << format_double(st.weight);
    for (int i = 0; i < st.s.size(); ++i) out << " " << format_double(st.s[i]);
    out << "\n";
    for (const auto& c : st.components) {
      out << "component " << format_double(c.weight);
      for (int i = 0; i < c.mean.size(); ++i) {
        out << " " << format_double(c.mean[i]);
      }
      for (int i = 0; i < c.cov_diag.size(); ++i) {
        out << " " << format_double(c.cov_diag[i]);
      }
      out << "\n";
    }
  }
  return out.str();
}

std::pair<Vec, Vec> sample_pair(const GmmTask& task, Rng& rng) {
  double u = rng.uniform();
  const GmmState* st = &task.states.back();
  for (const auto& cand : task.states) {
    if (u < cand.weight) {
      st = &cand;
      break;
    }
    u -= cand.weight;
  }
  u = rng.uniform();
  const GmmComponent* comp = &st->components.back();
  for (const auto& cand : st->components) {
    if (u < cand.weight) {
      comp = &cand;
      break;
    }
    u -= cand.weight;
  }
  Vec a0 = comp->mean +
           (comp->cov_diag.array().sqrt() *
            rng.normal_vec(task.d_a).array())
               .matrix();
  return {std::move(a0), st->s};
}

double log_pt(const GmmTask& task, const NoiseSchedule& sched, const Vec& a,
              const Vec& s, double t) {
  return eval_mixture(task.find_state(s), sched, a, t).log_p;
}

Vec oracle_score(const GmmTask& task, const NoiseSchedule& sched, const Vec& a,
                 const Vec& s, double t) {
  const auto ev = eval_mixture(task.find_state(s), sched, a, t);
  Vec score = Vec::Zero(task.d_a);
  for (size_t k = 0; k < ev.resp.size(); ++k) {
    score += ev.resp[k] * ev.comp_score[k];
  }
  return score;
}

Mat oracle_score_jacobian(const GmmTask& task, const NoiseSchedule& sched,
                          const Vec& a, const Vec& s, double t) {
  const auto ev = eval_mixture(task.find_state(s), sched, a, t);
  // Hessian of log p: sum_k r_k (g_k g_k^T - D_k^{-1}) - g_bar g_bar^T.
  Vec g_bar = Vec::Zero(task.d_a);
  Mat J = Mat::Zero(task.d_a, task.d_a);
  for (size_t k = 0; k < ev.resp.size(); ++k) {
    const Vec& g = ev.comp_score[k];
    J += ev.resp[k] * (g * g.transpose());
    J -= ev.resp[k] * ev.inv_d[k].asDiagonal();
    g_bar += ev.resp[k] * g;
  }
  J -= g_bar * g_bar.transpose();
  return J;
}

Vec oracle_epsilon(const GmmTask& task, const NoiseSchedule& sched,
                   const Vec& a, const Vec& s, double t) {
  return -sched.sigma(t) * oracle_score(task, sched, a, s, t);
}

Mat oracle_epsilon_jacobian(const GmmTask& task, const NoiseSchedule& sched,
                            const Vec& a, const Vec& s, double t) {
  return -sched.sigma(t) * oracle_score_jacobian(task, sched, a, s, t);
}

double energy_distance(const std::vector<Vec>& A, const std::vector<Vec>& B) {
  if (A.empty() || B.empty()) {
    throw std::invalid_argument("energy_distance: empty sample set");
  }
  const auto n = A.size();
  const auto m = B.size();
  double cross = 0.0;
  for (const auto& x : A) {
    for (const auto& y : B) cross += (x - y).norm();
  }
  cross *= 2.0 / (static_cast<double>(n) * static_cast<double>(m));
  auto within = [](const std::vector<Vec>& S) {
    if (S.size() < 2) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < S.size(); ++i) {
      for (size_t j = i + 1; j < S.size(); ++j) sum += (S[i] - S[j]).norm();
    }
    return 2.0 * sum / (static_cast<double>(S.size()) * (S.size() - 1));
  };
  return cross - within(A) - within(B);
}

}  // namespace cdiff
