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

#include "cdiff/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cdiff {

namespace {

void stamp_columns(CsvTable& table, const RowStamp& stamp) {
  table.columns.push_back("config_hash");
  table.columns.push_back("rng_seed");
  table.columns.push_back("code_version");
  (void)stamp;
}

void stamp_row(std::vector<std::string>& row, const RowStamp& stamp) {
  row.push_back(std::to_string(stamp.config_hash));
  row.push_back(std::to_string(stamp.seed));
  row.push_back(kCodeVersion);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Axis-aligned grids covering mean +- 3 sqrt(cov) across a state's modes.
std::vector<Vec> state_grid(const GmmState& st, int d_a, int grid_size) {
  Vec lo = Vec::Constant(d_a, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (const auto& c : st.components) {
    const Vec spread = 3.0 * c.cov_diag.array().sqrt().matrix();
    lo = lo.cwiseMin(c.mean - spread);
    hi = hi.cwiseMax(c.mean + spread);
  }
  std::vector<Vec> points;
  if (d_a == 1) {
    for (int i = 0; i < grid_size; ++i) {
      Vec a(1);
      a[0] = lo[0] + (hi[0] - lo[0]) * i / (grid_size - 1);
      points.push_back(a);
    }
  } else {
    for (int i = 0; i < grid_size; ++i) {
      for (int j = 0; j < grid_size; ++j) {
        Vec a(d_a);
        a[0] = lo[0] + (hi[0] - lo[0]) * i / (grid_size - 1);
        a[1] = lo[1] + (hi[1] - lo[1]) * j / (grid_size - 1);
        for (int k = 2; k < d_a; ++k) a[k] = 0.0;
        points.push_back(a);
      }
    }
  }
  return points;
}

Vec draw_from_state(const GmmState& st, int d_a, Rng& rng) {
  double u = rng.uniform();
  const GmmComponent* comp = &st.components.back();
  for (const auto& c : st.components) {
    if (u < c.weight) {
      comp = &c;
      break;
    }
    u -= c.weight;
  }
  return comp->mean +
         (comp->cov_diag.array().sqrt() * rng.normal_vec(d_a).array())
             .matrix();
}

double nearest_mode_sqdist(const Vec& a, const GmmState& st) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : st.components) {
    best = std::min(best, (a - c.mean).squaredNorm());
  }
  return best;
}

std::string sanitize_csv(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

constexpr uint64_t kEvalSalt = 0xd1b54a32d192ed03ull;

struct CellMetrics {
  std::string status = "ok";
  double energy = 0.0;
  double mean_lambda = 0.0;
  double coverage = 0.0;
};

CellMetrics evaluate_trained_cell(const TrainConfig& cfg, const GmmTask& task,
                                  SamplerKind sampler, int sample_steps,
                                  int n_samples) {
  CellMetrics out;
  try {
    const TrainResult res = train(cfg, task);
    if (res.aborted) {
      out.status = "aborted";
      return out;
    }
    ScoreNetwork net(cfg.network);
    net.params() = res.ema_params;
    Rng eval_rng(cfg.rng_seed ^ kEvalSalt);
    double energy = 0.0;
    double coverage = 0.0;
    for (const auto& st : task.states) {
      std::vector<Vec> samples;
      samples.reserve(n_samples);
      for (int i = 0; i < n_samples; ++i) {
        samples.push_back(run_sampler(sampler, net, cfg.schedule, st.s,
                                      eval_rng.normal_vec(task.d_a),
                                      sample_steps, eval_rng)
                              .final_state());
      }
      std::vector<Vec> truth;
      truth.reserve(n_samples);
      for (int i = 0; i < n_samples; ++i) {
        truth.push_back(draw_from_state(st, task.d_a, eval_rng));
      }
      energy += st.weight * energy_distance(samples, truth);
      coverage += st.weight * mode_coverage(samples, st);
    }
    out.energy = energy;
    out.coverage = coverage;
    out.mean_lambda =
        contraction_grid_summary(net, cfg.schedule, task, 7, 5).mean_lambda;
  } catch (const std::exception& e) {
    out.status = sanitize_csv(e.what());
  }
  return out;
}

}  // namespace

std::string csv_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string CsvTable::to_csv() const {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) {
    out += columns[i];
    out += (i + 1 < columns.size()) ? ',' : '\n';
  }
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      out += (i + 1 < row.size()) ? ',' : '\n';
    }
  }
  return out;
}

void CsvTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("csv: cannot open " + path);
  out << to_csv();
}

ContractionSummary contraction_grid_summary(const ScoreField& net,
                                            const NoiseSchedule& sched,
                                            const GmmTask& task,
                                            int grid_size, int time_points) {
  ContractionSummary sum;
  int satisfied = 0, flow_contractive = 0;
  for (const auto& st : task.states) {
    for (const Vec& a : state_grid(st, task.d_a, grid_size)) {
      for (int j = 0; j < time_points; ++j) {
        const double t =
            sched.t_eps + (1.0 - sched.t_eps) * j / (time_points - 1);
        const double lam = exact_eigmax(sym(net.epsilon_jacobian(a, st.s, t)));
        const double lam_flow = sched.drift_f(t) + sched.h_coeff(t) * lam;
        sum.mean_lambda += lam;
        sum.mean_lambda_flow += lam_flow;
        if (lam < sched.contraction_threshold(t)) ++satisfied;
        if (lam_flow < 0.0) ++flow_contractive;
        ++sum.points;
      }
    }
  }
  sum.mean_lambda /= sum.points;
  sum.mean_lambda_flow /= sum.points;
  sum.satisfaction_fraction = static_cast<double>(satisfied) / sum.points;
  sum.flow_contractive_fraction =
      static_cast<double>(flow_contractive) / sum.points;
  return sum;
}

CsvTable contraction_report(const ScoreField& net, const NoiseSchedule& sched,
                            const GmmTask& task, int grid_size,
                            int time_points, const RowStamp& stamp) {
  CsvTable table;
  table.columns = {"state_id", "t"};
  for (int k = 0; k < task.d_a; ++k) {
    table.columns.push_back("a" + std::to_string(k));
  }
  table.columns.insert(table.columns.end(),
                       {"lambda_max", "threshold", "satisfied",
                        "lambda_max_flow", "flow_contractive"});
  stamp_columns(table, stamp);
  for (size_t si = 0; si < task.states.size(); ++si) {
    const auto& st = task.states[si];
    for (const Vec& a : state_grid(st, task.d_a, grid_size)) {
      for (int j = 0; j < time_points; ++j) {
        const double t =
            sched.t_eps + (1.0 - sched.t_eps) * j / (time_points - 1);
        const double lam = exact_eigmax(sym(net.epsilon_jacobian(a, st.s, t)));
        const double thr = sched.contraction_threshold(t);
        const double lam_flow = sched.drift_f(t) + sched.h_coeff(t) * lam;
        std::vector<std::string> row = {std::to_string(si), csv_double(t)};
        for (int k = 0; k < task.d_a; ++k) row.push_back(csv_double(a[k]));
        row.push_back(csv_double(lam));
        row.push_back(csv_double(thr));
        row.push_back(lam < thr ? "1" : "0");
        row.push_back(csv_double(lam_flow));
        row.push_back(lam_flow < 0.0 ? "1" : "0");
        stamp_row(row, stamp);
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

double median_within_mode_variance(const std::vector<Vec>& samples,
                                   const GmmState& state) {
  std::vector<double> d;
  d.reserve(samples.size());
  for (const auto& a : samples) d.push_back(nearest_mode_sqdist(a, state));
  return median(std::move(d));
}

double mode_coverage(const std::vector<Vec>& samples, const GmmState& state,
                     double min_share) {
  if (samples.empty()) return 0.0;
  std::vector<int> counts(state.components.size(), 0);
  for (const auto& a : samples) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < state.components.size(); ++k) {
      const double dk = (a - state.components[k].mean).squaredNorm();
      if (dk < best_d) {
        best_d = dk;
        best = k;
      }
    }
    ++counts[best];
  }
  int covered = 0;
  for (int c : counts) {
    if (c >= min_share * static_cast<double>(samples.size())) ++covered;
  }
  return static_cast<double>(covered) / counts.size();
}

CsvTable seed_sensitivity_report(const ScoreField& net,
                                 const NoiseSchedule& sched,
                                 const GmmTask& task, const Vec& s,
                                 int n_pairs, SamplerKind sampler, int steps,
                                 Rng& rng, const RowStamp& stamp,
                                 SeedSensitivitySummary* summary) {
  const GmmState& st = task.find_state(s);
  CsvTable table;
  table.columns = {"pair",          "seed_distance",    "terminal_distance",
                   "mode_sqdist_1", "mode_sqdist_2",    "gronwall_integral",
                   "bound_factor",  "observed_ratio"};
  stamp_columns(table, stamp);
  std::vector<double> pair_dists, mode_sqdists, bounds;
  for (int i = 0; i < n_pairs; ++i) {
    const Vec seed1 = rng.normal_vec(task.d_a);
    const Vec seed2 = rng.normal_vec(task.d_a);
    const Vec a1 = run_sampler(sampler, net, sched, s, seed1, steps, rng)
                       .final_state();
    const Vec a2 = run_sampler(sampler, net, sched, s, seed2, steps, rng)
                       .final_state();
    Vec delta0 = seed2 - seed1;
    delta0 = (delta0.norm() > 0.0) ? Vec(delta0 / delta0.norm())
                                   : Vec(Vec::Unit(task.d_a, 0));
    const GronwallResult audit =
        gronwall_audit(net, sched, s, seed1, delta0, 200);
    const double dist = (a1 - a2).norm();
    const double m1 = nearest_mode_sqdist(a1, st);
    const double m2 = nearest_mode_sqdist(a2, st);
    pair_dists.push_back(dist);
    mode_sqdists.push_back(m1);
    mode_sqdists.push_back(m2);
    bounds.push_back(audit.record.bound_factor);
    std::vector<std::string> row = {std::to_string(i),
                                    csv_double((seed1 - seed2).norm()),
                                    csv_double(dist),
                                    csv_double(m1),
                                    csv_double(m2),
                                    csv_double(audit.record.integral),
                                    csv_double(audit.record.bound_factor),
                                    csv_double(audit.observed_ratio)};
    stamp_row(row, stamp);
    table.rows.push_back(std::move(row));
  }
  if (summary != nullptr) {
    summary->median_pair_distance = median(pair_dists);
    summary->median_within_mode_variance = median(mode_sqdists);
    summary->median_bound_factor = median(bounds);
  }
  return table;
}

double sampler_energy_distance(const ScoreField& net,
                               const NoiseSchedule& sched, const GmmTask& task,
                               const GmmState& state, SamplerKind sampler,
                               int steps, int n_samples, Rng& rng) {
  std::vector<Vec> samples, truth;
  samples.reserve(n_samples);
  truth.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    samples.push_back(run_sampler(sampler, net, sched, state.s,
                                  rng.normal_vec(task.d_a), steps, rng)
                          .final_state());
  }
  for (int i = 0; i < n_samples; ++i) {
    truth.push_back(draw_from_state(state, task.d_a, rng));
  }
  return energy_distance(samples, truth);
}

CsvTable solver_sweep_report(
    const std::vector<std::pair<std::string, const ScoreField*>>& nets,
    const NoiseSchedule& sched, const GmmTask& task,
    const std::vector<int>& steps_list, SamplerKind sampler, int n_samples,
    Rng& rng, const RowStamp& stamp) {
  CsvTable table;
  table.columns = {"model", "steps", "energy_distance"};
  stamp_columns(table, stamp);
  for (const auto& [name, net] : nets) {
    for (int steps : steps_list) {
      double energy = 0.0;
      for (const auto& st : task.states) {
        energy += st.weight * sampler_energy_distance(*net, sched, task, st,
                                                      sampler, steps,
                                                      n_samples, rng);
      }
      std::vector<std::string> row = {sanitize_csv(name),
                                      std::to_string(steps),
                                      csv_double(energy)};
      stamp_row(row, stamp);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

CsvTable gamma_sweep_report(const GmmTask& task,
                            const std::vector<double>& gammas,
                            const TrainConfig& base,
                            const std::vector<uint64_t>& seeds,
                            SamplerKind sampler, int sample_steps,
                            int n_samples, const RowStamp& stamp) {
  CsvTable table;
  table.columns = {"gamma",       "seed",        "status",
                   "energy_distance", "mean_lambda", "mode_coverage"};
  stamp_columns(table, stamp);
  for (double gamma : gammas) {
    for (uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.contraction.gamma = gamma;
      cfg.rng_seed = seed;
      const CellMetrics m =
          evaluate_trained_cell(cfg, task, sampler, sample_steps, n_samples);
      std::vector<std::string> row = {csv_double(gamma),
                                      std::to_string(seed),
                                      m.status,
                                      csv_double(m.energy),
                                      csv_double(m.mean_lambda),
                                      csv_double(m.coverage)};
      stamp_row(row, stamp);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

CsvTable data_fraction_sweep_report(const GmmTask& task,
                                    const std::vector<double>& fractions,
                                    const TrainConfig& base,
                                    const std::vector<uint64_t>& seeds,
                                    SamplerKind sampler, int sample_steps,
                                    int n_samples, const RowStamp& stamp) {
  CsvTable table;
  table.columns = {"fraction", "seed", "model", "status", "energy_distance"};
  stamp_columns(table, stamp);
  for (double fraction : fractions) {
    for (uint64_t seed : seeds) {
      for (const bool contractive : {false, true}) {
        TrainConfig cfg = base;
        cfg.data_fraction = fraction;
        cfg.rng_seed = seed;
        if (!contractive) cfg.contraction.gamma = 0.0;
        const CellMetrics m =
            evaluate_trained_cell(cfg, task, sampler, sample_steps, n_samples);
        std::vector<std::string> row = {
            csv_double(fraction), std::to_string(seed),
            contractive ? "contractive" : "baseline", m.status,
            csv_double(m.energy)};
        stamp_row(row, stamp);
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

double rayleigh_error_bound(double lam1_shifted, double lam2_shifted,
                            double alpha1, int K) {
  const double l1 = std::abs(lam1_shifted);
  const double l2 = std::abs(lam2_shifted);
  if (l1 == 0.0 || alpha1 == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return (l1 + l2) * std::pow(l2 / l1, 2 * K) *
         (1.0 - alpha1 * alpha1) / (alpha1 * alpha1);
}

CsvTable power_iteration_benchmark(const std::vector<int>& dims,
                                   const std::vector<int>& K_list, int reps,
                                   Rng& rng, const RowStamp& stamp,
                                   CsvTable* timing) {
  CsvTable table;
  table.columns = {"dim", "K", "rep", "abs_error", "error_bound"};
  stamp_columns(table, stamp);
  if (timing != nullptr) {
    timing->columns = {"dim", "K", "pi_micros_per_call",
                       "eigensolve_micros_per_call"};
  }
  using Clock = std::chrono::steady_clock;
  for (int dim : dims) {
    for (int K : K_list) {
      double pi_ns = 0.0, eig_ns = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        Mat M(dim, dim);
        for (int i = 0; i < dim; ++i) {
          for (int j = 0; j < dim; ++j) M(i, j) = rng.normal();
        }
        const Mat A = sym(M);
        const auto t0 = Clock::now();
        const EigenSystem es = jacobi_eigensystem(A);
        const auto t1 = Clock::now();
        const double mu = A.norm() + 1e-6;
        Vec v0;
        auto matvec = [&](const Vec& v) -> Vec { return A * v + mu * v; };
        const auto t2 = Clock::now();
        const auto [lam_shifted, v] = power_iteration(matvec, dim, K, rng, &v0);
        const auto t3 = Clock::now();
        eig_ns += std::chrono::duration<double, std::nano>(t1 - t0).count();
        pi_ns += std::chrono::duration<double, std::nano>(t3 - t2).count();
        const double err = std::abs((lam_shifted - mu) - es.values[0]);
        const double alpha1 = std::abs(v0.dot(es.vectors.col(0)));
        const double bound =
            (dim > 1) ? rayleigh_error_bound(es.values[0] + mu,
                                             es.values[1] + mu, alpha1, K)
                      : 0.0;
        std::vector<std::string> row = {std::to_string(dim),
                                        std::to_string(K),
                                        std::to_string(rep),
                                        csv_double(err), csv_double(bound)};
        stamp_row(row, stamp);
        table.rows.push_back(std::move(row));
      }
      if (timing != nullptr) {
        timing->rows.push_back({std::to_string(dim), std::to_string(K),
                                csv_double(pi_ns / reps / 1000.0),
                                csv_double(eig_ns / reps / 1000.0)});
      }
    }
  }
  return table;
}

}  // namespace cdiff
