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

#include "cdiff/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cdiff/checkpoint.hpp"
#include "cdiff/diagnostics.hpp"
#include "cdiff/sampler.hpp"
#include "cdiff/svg.hpp"
#include "cdiff/toyworld.hpp"

namespace cdiff {

namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "task",
      "schedule.kind",
      "schedule.beta_min",
      "schedule.beta_max",
      "schedule.t_eps",
      "network.hidden_layers",
      "network.hidden_width",
      "network.time_embed_dim",
      "contraction.gamma",
      "contraction.beta",
      "contraction.loss_type",
      "contraction.num_pi",
      "contraction.contr_steps",
      "contraction.threshold_override",
      "train.steps",
      "train.batch_size",
      "train.learning_rate",
      "train.adam_beta1",
      "train.adam_beta2",
      "train.adam_eps",
      "train.ema_rate",
      "train.grad_clip_norm",
      "train.seed",
      "train.eval_every",
      "train.checkpoint_every",
      "train.data_pool_size",
      "train.data_fraction",
      "sampler.kind",
      "sampler.steps",
      "sample.n",
      "report.grid_size",
      "report.time_points",
      "report.n_pairs",
      "report.n_samples",
      "report.steps_list",
      "sweep.kind",
      "sweep.gammas",
      "sweep.fractions",
      "sweep.seeds",
  };
  return keys;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, const std::string& key,
                          Parse parse) {
  std::vector<T> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(parse(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key +
                                  "' has unparseable list item '" + item + "'");
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("config: key '" + key + "' has an empty list");
  }
  return out;
}

std::vector<double> get_double_list(const Config& cfg, const std::string& key,
                                    const std::vector<double>& fallback) {
  if (!cfg.has(key)) return fallback;
  return parse_list<double>(cfg.get_string(key), key,
                            [](const std::string& s) { return std::stod(s); });
}

std::vector<int> get_int_list(const Config& cfg, const std::string& key,
                              const std::vector<int>& fallback) {
  if (!cfg.has(key)) return fallback;
  return parse_list<int>(cfg.get_string(key), key,
                         [](const std::string& s) { return std::stoi(s); });
}

std::vector<uint64_t> get_seed_list(const Config& cfg, const std::string& key,
                                    const std::vector<uint64_t>& fallback) {
  if (!cfg.has(key)) return fallback;
  return parse_list<uint64_t>(
      cfg.get_string(key), key,
      [](const std::string& s) { return std::stoull(s); });
}

struct LoadedModel {
  Checkpoint ckpt;
  GmmTask task;
  ScoreNetwork net;
};

LoadedModel load_model(const std::string& path, bool use_raw_params) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto meta = nlohmann::json::parse(ckpt.metadata_json);
  if (!meta.contains("task")) {
    throw std::runtime_error("checkpoint " + path +
                             " has no embedded task definition");
  }
  GmmTask task = parse_task(meta.at("task").get<std::string>());
  ScoreNetwork net(ckpt.network);
  const auto& src = (use_raw_params || ckpt.ema_params.empty())
                        ? ckpt.params
                        : ckpt.ema_params;
  if (src.size() != net.param_count()) {
    throw std::runtime_error("checkpoint " + path +
                             ": parameter count does not match the header");
  }
  ScoreNetwork copy(ckpt.network);
  copy.params() = src;
  return {std::move(ckpt), std::move(task), std::move(copy)};
}

int fail(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.schedule.kind =
      schedule_kind_from_string(cfg.get_string("schedule.kind", "linear_vp"));
  tc.schedule.beta_min = cfg.get_double("schedule.beta_min", 0.1);
  tc.schedule.beta_max = cfg.get_double("schedule.beta_max", 20.0);
  tc.schedule.t_eps = cfg.get_double("schedule.t_eps", 1e-3);
  tc.network.hidden_layers = cfg.get_int("network.hidden_layers", 3);
  tc.network.hidden_width = cfg.get_int("network.hidden_width", 128);
  tc.network.time_embed_dim = cfg.get_int("network.time_embed_dim", 16);
  tc.contraction.gamma = cfg.get_double("contraction.gamma", 0.1);
  tc.contraction.beta = cfg.get_double("contraction.beta", 0.1);
  tc.contraction.loss_type = contraction_loss_type_from_string(
      cfg.get_string("contraction.loss_type", "frobenius"));
  tc.contraction.num_pi = cfg.get_int("contraction.num_pi", 4);
  tc.contraction.contr_steps = cfg.get_double("contraction.contr_steps", 1.0);
  if (cfg.has("contraction.threshold_override")) {
    tc.contraction.threshold_override =
        cfg.get_double("contraction.threshold_override");
  }
  tc.steps = cfg.get_int("train.steps", 5000);
  tc.batch_size = cfg.get_int("train.batch_size", 64);
  tc.learning_rate = cfg.get_double("train.learning_rate", 1e-4);
  tc.adam_beta1 = cfg.get_double("train.adam_beta1", 0.9);
  tc.adam_beta2 = cfg.get_double("train.adam_beta2", 0.999);
  tc.adam_eps = cfg.get_double("train.adam_eps", 1e-8);
  tc.ema_rate = cfg.get_double("train.ema_rate", 0.999);
  tc.grad_clip_norm = cfg.get_double("train.grad_clip_norm", 10.0);
  tc.rng_seed = cfg.get_uint64("train.seed", 0);
  tc.eval_every = cfg.get_int("train.eval_every", 100);
  tc.checkpoint_every = cfg.get_int("train.checkpoint_every", 1000);
  tc.data_pool_size = cfg.get_int("train.data_pool_size", 10000);
  tc.data_fraction = cfg.get_double("train.data_fraction", 1.0);
  return tc;
}

int worker_threads() {
  const char* env = std::getenv("CDL_THREADS");
  if (env == nullptr) return 0;
  try {
    return std::max(0, std::stoi(env));
  } catch (const std::exception&) {
    return 0;
  }
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override) {
  try {
    Config cfg = Config::load(config_path);
    cfg.require_known_keys(known_config_keys());
    if (seed_override) {
      cfg.set("train.seed", std::to_string(*seed_override));
    }
    const GmmTask task = load_task(cfg.get_string("task"));
    TrainConfig tc = train_config_from(cfg);
    tc.network.d_a = task.d_a;
    tc.network.d_s = task.d_s;
    tc.validate();

    std::filesystem::create_directories(out_dir);
    // Snapshot the effective config before the first gradient step.
    {
      std::ofstream snap(out_dir + "/config.snapshot", std::ios::trunc);
      snap << cfg.serialize();
    }
    const TrainResult res = train(tc, task, out_dir);
    if (res.aborted) {
      std::cerr << "error: training aborted on a non-finite loss after step "
                << res.completed_steps << "; last good checkpoint retained\n";
      return 1;
    }
    std::cout << "trained " << res.completed_steps << " steps; final dsm "
              << (res.log.records.empty() ? 0.0
                                          : res.log.records.back().dsm_loss)
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int cmd_sample(const std::string& checkpoint_path, const std::string& out_path,
               int n, const std::string& sampler, int steps, uint64_t seed,
               bool use_raw_params) {
  try {
    if (n < 0) throw std::invalid_argument("sample: --n must be >= 0");
    const SamplerKind kind = sampler_kind_from_string(sampler);
    LoadedModel model = load_model(checkpoint_path, use_raw_params);
    Rng rng(seed);
    CsvTable table;
    table.columns = {"state_id"};
    for (int k = 0; k < model.task.d_a; ++k) {
      table.columns.push_back("seed" + std::to_string(k));
    }
    for (int k = 0; k < model.task.d_a; ++k) {
      table.columns.push_back("a" + std::to_string(k));
    }
    for (size_t si = 0; si < model.task.states.size(); ++si) {
      const auto& st = model.task.states[si];
      for (int i = 0; i < n; ++i) {
        const Vec z = rng.normal_vec(model.task.d_a);
        const Vec a = run_sampler(kind, model.net, model.ckpt.schedule, st.s,
                                  z, steps, rng)
                          .final_state();
        std::vector<std::string> row = {std::to_string(si)};
        for (int k = 0; k < model.task.d_a; ++k) {
          row.push_back(csv_double(z[k]));
        }
        for (int k = 0; k < model.task.d_a; ++k) {
          row.push_back(csv_double(a[k]));
        }
        table.rows.push_back(std::move(row));
      }
    }
    table.save(out_path);
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int cmd_report(const std::string& kind,
               const std::vector<std::string>& checkpoint_paths,
               const std::string& config_path, const std::string& out_dir,
               uint64_t seed) {
  try {
    Config cfg;
    if (!config_path.empty()) {
      cfg = Config::load(config_path);
      cfg.require_known_keys(known_config_keys());
    }
    std::filesystem::create_directories(out_dir);
    RowStamp stamp{config_path.empty() ? 0 : cfg.hash(), seed};
    const SamplerKind sampler =
        sampler_kind_from_string(cfg.get_string("sampler.kind", "dpm2m"));
    const int sampler_steps = cfg.get_int("sampler.steps", 15);
    const int n_samples = cfg.get_int("report.n_samples", 256);

    auto need_checkpoint = [&]() -> const std::string& {
      if (checkpoint_paths.empty()) {
        throw std::invalid_argument("report " + kind +
                                    ": --checkpoint is required");
      }
      return checkpoint_paths.front();
    };

    if (kind == "contraction") {
      LoadedModel model = load_model(need_checkpoint(), false);
      contraction_report(model.net, model.ckpt.schedule, model.task,
                         cfg.get_int("report.grid_size", 9),
                         cfg.get_int("report.time_points", 7), stamp)
          .save(out_dir + "/contraction.csv");
    } else if (kind == "seed_sensitivity") {
      LoadedModel model = load_model(need_checkpoint(), false);
      Rng rng(seed);
      seed_sensitivity_report(model.net, model.ckpt.schedule, model.task,
                              model.task.states.front().s,
                              cfg.get_int("report.n_pairs", 20), sampler,
                              sampler_steps, rng, stamp)
          .save(out_dir + "/seed_sensitivity.csv");
    } else if (kind == "solver_sweep") {
      if (checkpoint_paths.empty()) {
        throw std::invalid_argument(
            "report solver_sweep: at least one --checkpoint required");
      }
      std::vector<LoadedModel> models;
      for (const auto& path : checkpoint_paths) {
        models.push_back(load_model(path, false));
      }
      std::vector<std::pair<std::string, const ScoreField*>> nets;
      for (size_t i = 0; i < models.size(); ++i) {
        nets.emplace_back("model" + std::to_string(i), &models[i].net);
      }
      const auto steps_list =
          get_int_list(cfg, "report.steps_list", {5, 15, 50});
      Rng rng(seed);
      const CsvTable table = solver_sweep_report(
          nets, models.front().ckpt.schedule, models.front().task, steps_list,
          sampler, n_samples, rng, stamp);
      table.save(out_dir + "/solver_sweep.csv");
      SvgPlot plot(520, 360, "energy distance vs sampling steps");
      const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
      for (size_t i = 0; i < nets.size(); ++i) {
        std::vector<double> xs, ys;
        for (const auto& row : table.rows) {
          if (row[0] == nets[i].first) {
            xs.push_back(std::stod(row[1]));
            ys.push_back(std::stod(row[2]));
          }
        }
        plot.add_line(xs, ys, colors[i % 4], nets[i].first);
      }
      plot.save(out_dir + "/solver_sweep.svg");
    } else if (kind == "gamma_sweep" || kind == "data_fraction") {
      if (config_path.empty()) {
        throw std::invalid_argument("report " + kind + ": --config required");
      }
      const GmmTask task = load_task(cfg.get_string("task"));
      TrainConfig base = train_config_from(cfg);
      base.network.d_a = task.d_a;
      base.network.d_s = task.d_s;
      const auto seeds = get_seed_list(cfg, "sweep.seeds", {1, 2, 3, 4, 5});
      if (kind == "gamma_sweep") {
        const auto gammas = get_double_list(
            cfg, "sweep.gammas", {0.001, 0.01, 0.1, 1.0, 10.0, 100.0});
        gamma_sweep_report(task, gammas, base, seeds, sampler, sampler_steps,
                           n_samples, stamp)
            .save(out_dir + "/gamma_sweep.csv");
      } else {
        const auto fractions =
            get_double_list(cfg, "sweep.fractions", {0.1, 1.0});
        data_fraction_sweep_report(task, fractions, base, seeds, sampler,
                                   sampler_steps, n_samples, stamp)
            .save(out_dir + "/data_fraction.csv");
      }
    } else if (kind == "pi_bench") {
      Rng rng(seed);
      CsvTable timing;
      power_iteration_benchmark({2, 4, 8, 16, 32}, {4, 200}, 20, rng, stamp,
                                &timing)
          .save(out_dir + "/pi_bench.csv");
      timing.save(out_dir + "/pi_bench.timing.csv");
    } else {
      throw std::invalid_argument(
          "report: unknown kind '" + kind +
          "' (expected contraction, seed_sensitivity, solver_sweep, "
          "gamma_sweep, data_fraction or pi_bench)");
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override) {
  try {
    Config cfg = Config::load(config_path);
    cfg.require_known_keys(known_config_keys());
    const std::string kind = cfg.get_string("sweep.kind");
    if (kind != "gamma_sweep" && kind != "data_fraction") {
      throw std::invalid_argument(
          "config: key 'sweep.kind' has value '" + kind +
          "', expected gamma_sweep or data_fraction");
    }
    return cmd_report(kind, {}, config_path, out_dir,
                      seed_override.value_or(cfg.get_uint64("train.seed", 0)));
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"contractive diffusion policy toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, sampler = "dpm2m", report_kind;
  std::vector<std::string> checkpoints;
  uint64_t seed = 0;
  int n = 256, steps = 15;
  bool raw = false;

  auto* t = app.add_subcommand("train", "train a policy from a config file");
  t->add_option("--config", config_path, "config file")->required();
  t->add_option("--out", out, "run directory")->required();
  auto* t_seed = t->add_option("--seed", seed, "rng seed override");

  auto* s = app.add_subcommand("sample", "draw samples from a checkpoint");
  s->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  s->add_option("--out", out, "output csv path")->required();
  s->add_option("--n", n, "samples per state");
  s->add_option("--sampler", sampler, "euler|dpm2m|ddim|ddpm");
  s->add_option("--steps", steps, "sampling steps");
  s->add_option("--seed", seed, "rng seed");
  s->add_flag("--raw", raw, "use raw instead of EMA parameters");

  auto* r = app.add_subcommand("report", "emit a diagnostic report");
  r->add_option("kind", report_kind, "report kind")->required();
  r->add_option("--checkpoint", checkpoints, "checkpoint file(s)");
  r->add_option("--config", config_path, "config file");
  r->add_option("--out", out, "output directory")->required();
  r->add_option("--seed", seed, "rng seed");

  auto* w = app.add_subcommand("sweep", "run a training sweep from a config");
  w->add_option("--config", config_path, "config file")->required();
  w->add_option("--out", out, "output directory")->required();
  auto* w_seed = w->add_option("--seed", seed, "rng seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (t->parsed()) {
    return cmd_train(config_path, out,
                     t_seed->count() ? std::optional<uint64_t>(seed)
                                     : std::nullopt);
  }
  if (s->parsed()) {
    return cmd_sample(checkpoint, out, n, sampler, steps, seed, raw);
  }
  if (r->parsed()) {
    return cmd_report(report_kind, checkpoints, config_path, out, seed);
  }
  if (w->parsed()) {
    return cmd_sweep(config_path, out,
                     w_seed->count() ? std::optional<uint64_t>(seed)
                                     : std::nullopt);
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("cdiff");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cdiff
