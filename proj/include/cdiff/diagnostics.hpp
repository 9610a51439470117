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

#ifndef CDIFF_DIAGNOSTICS_HPP_
#define CDIFF_DIAGNOSTICS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cdiff/contraction.hpp"
#include "cdiff/sampler.hpp"
#include "cdiff/toyworld.hpp"
#include "cdiff/train.hpp"

namespace cdiff {

inline constexpr const char* kCodeVersion = "cdiff-0.1.0";

// Deterministic provenance columns stamped into every report row.
struct RowStamp {
  uint64_t config_hash = 0;
  uint64_t seed = 0;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  void save(const std::string& path) const;
};

// %.17g, round-trip exact for doubles.
std::string csv_double(double x);

// Contraction statistics over an (a, t) grid covering the data region.
struct ContractionSummary {
  double mean_lambda = 0.0;           // exact lambda_max(sym J_eps)
  double satisfaction_fraction = 0.0;  // Theorem-2 condition on J_eps
  double mean_lambda_flow = 0.0;       // lambda_max(sym J_F) = f + h*lambda
  double flow_contractive_fraction = 0.0;
  int points = 0;
};

ContractionSummary contraction_grid_summary(const ScoreField& net,
                                            const NoiseSchedule& sched,
                                            const GmmTask& task,
                                            int grid_size, int time_points);

CsvTable contraction_report(const ScoreField& net, const NoiseSchedule& sched,
                            const GmmTask& task, int grid_size,
                            int time_points, const RowStamp& stamp);

// Per-sample squared distance to the nearest mode mean; returns the median.
double median_within_mode_variance(const std::vector<Vec>& samples,
                                   const GmmState& state);
// Fraction of the state's modes that attract at least min_share of samples.
double mode_coverage(const std::vector<Vec>& samples, const GmmState& state,
                     double min_share = 0.01);

struct SeedSensitivitySummary {
  double median_pair_distance = 0.0;
  double median_within_mode_variance = 0.0;
  double median_bound_factor = 0.0;
};

// Pairs of independent seeds at a fixed state: terminal distances, nearest
// mode distances and a Gronwall audit of the probability-flow ODE per pair.
CsvTable seed_sensitivity_report(const ScoreField& net,
                                 const NoiseSchedule& sched,
                                 const GmmTask& task, const Vec& s,
                                 int n_pairs, SamplerKind sampler, int steps,
                                 Rng& rng, const RowStamp& stamp,
                                 SeedSensitivitySummary* summary = nullptr);

// Energy distance between sampler output and fresh analytic task draws at
// one state.
double sampler_energy_distance(const ScoreField& net,
                               const NoiseSchedule& sched, const GmmTask& task,
                               const GmmState& state, SamplerKind sampler,
                               int steps, int n_samples, Rng& rng);

// Energy distance vs step count for one or more named fields.
CsvTable solver_sweep_report(
    const std::vector<std::pair<std::string, const ScoreField*>>& nets,
    const NoiseSchedule& sched, const GmmTask& task,
    const std::vector<int>& steps_list, SamplerKind sampler, int n_samples,
    Rng& rng, const RowStamp& stamp);

// Full training per (gamma, seed) cell. Failed cells are recorded with
// status != ok and the sweep continues.
CsvTable gamma_sweep_report(const GmmTask& task,
                            const std::vector<double>& gammas,
                            const TrainConfig& base,
                            const std::vector<uint64_t>& seeds,
                            SamplerKind sampler, int sample_steps,
                            int n_samples, const RowStamp& stamp);

CsvTable data_fraction_sweep_report(const GmmTask& task,
                                    const std::vector<double>& fractions,
                                    const TrainConfig& base,
                                    const std::vector<uint64_t>& seeds,
                                    SamplerKind sampler, int sample_steps,
                                    int n_samples, const RowStamp& stamp);

// Accuracy of the shifted power iteration against the exact eigensolve,
// plus the App.-D.4-style a-priori error bound column. Wall times go to the
// separate timing table (non-deterministic by nature, excluded from the
// byte-identity contract).
CsvTable power_iteration_benchmark(const std::vector<int>& dims,
                                   const std::vector<int>& K_list, int reps,
                                   Rng& rng, const RowStamp& stamp,
                                   CsvTable* timing = nullptr);

// Rayleigh-quotient error bound for K shifted power-iteration steps given
// the exact shifted spectrum and the start vector's alignment alpha1 with
// the dominant eigenvector.
double rayleigh_error_bound(double lam1_shifted, double lam2_shifted,
                            double alpha1, int K);

}  // namespace cdiff

#endif  // CDIFF_DIAGNOSTICS_HPP_
