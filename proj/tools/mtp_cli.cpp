// Command-line frontend: pretrain modular reservoirs, train readouts and
// separate baselines, evaluate, run perturbation sweeps, and reproduce the
// whole experiment from one config file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mtp/config.hpp"
#include "mtp/eval.hpp"
#include "mtp/perturb.hpp"
#include "mtp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mtp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitNumerical = 3;

struct GlobalOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  bool force = false;
  int threads = 1;
  std::string format;
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
  ExperimentConfig cfg =
      g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.has_seed) cfg.master_seed = g.seed_override;
  if (!g.out_override.empty()) cfg.output_dir = g.out_override;
  if (!g.format.empty()) cfg.report_format = g.format;
  cfg.validate();
  return cfg;
}

void require_fresh(const fs::path& p, bool force) {
  if (fs::exists(p) && !force)
    throw std::runtime_error("output " + p.string() +
                             " exists; pass --force to overwrite");
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
}

// Deterministic worker pool: item i always computes the same result no matter
// the schedule.
void parallel_for(int n_items, int n_threads,
                  const std::function<void(int)>& fn) {
  if (n_threads <= 1 || n_items <= 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_items; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::string performance_table_csv(const NetworkParams& params,
                                  const std::vector<TaskKind>& tasks,
                                  const TrialTiming& timing,
                                  std::uint64_t test_seed) {
  std::string out = "task,percent\n";
  char buf[96];
  for (TaskKind task : tasks) {
    const auto r = performance(params, task, timing, test_seed);
    std::snprintf(buf, sizeof(buf), "%s,%.17g\n", task_name(task), r.percent);
    out += buf;
  }
  return out;
}

PretrainedReservoir pretrain_one(const ExperimentConfig& cfg,
                                 std::uint64_t seed) {
  RngStream rng(seed);
  auto reservoir = pretrain_modules(cfg.train, cfg.timing, cfg.connectivity,
                                    rng, cfg.n, cfg.partition(), cfg.g,
                                    cfg.noise);
  reservoir.config_hash = config_hash(cfg);
  return reservoir;
}

void save_reservoir(const PretrainedReservoir& r, const fs::path& dir) {
  save_network(r.params, dir.string(), {r.master_seed, r.config_hash});
  for (const auto& [m, log] : r.pretrain_logs) {
    const std::string name =
        m < 3 ? "pretrain_M" + std::to_string(m + 1) : "pretrain_joint";
    write_file(dir / (name + ".csv"), log.to_csv());
  }
}

int cmd_pretrain(const GlobalOpts& g) {
  const auto cfg = resolve_config(g);
  const fs::path dir = fs::path(cfg.output_dir) / "reservoir";
  require_fresh(dir / "weights.bin", g.force);
  const auto reservoir = pretrain_one(cfg, cfg.master_seed);
  save_reservoir(reservoir, dir);
  for (const auto& [m, log] : reservoir.pretrain_logs)
    if (!log.entries.empty())
      std::printf("module %d final loss %.6g\n", m + 1,
                  log.entries.back().loss);
  std::printf("reservoir written to %s\n", dir.string().c_str());
  return kExitOk;
}

void train_all_readouts(PretrainedReservoir& reservoir,
                        const ExperimentConfig& cfg, int threads,
                        std::map<TaskKind, TrainLog>& logs) {
  const auto tasks = cfg.task_list();
  const RngStream master(reservoir.master_seed);
  std::vector<Matrix> trained(tasks.size());
  std::vector<TrainLog> task_logs(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), threads, [&](int i) {
    // Per-task copy: readout trainings are independent by construction.
    PretrainedReservoir local;
    local.params = reservoir.params;
    local.master_seed = reservoir.master_seed;
    auto rng = derive_stream(master, "readouts", 0);
    task_logs[i] =
        train_readout(local, tasks[i], cfg.readout_train(), cfg.timing, rng,
                      cfg.noise);
    trained[i] = local.params.readouts.at(tasks[i]);
  });
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    reservoir.params.readouts[tasks[i]] = trained[i];
    logs[tasks[i]] = task_logs[i];
  }
}

int cmd_train_readouts(const GlobalOpts& g, const std::string& reservoir_dir) {
  const auto cfg = resolve_config(g);
  auto [params, meta] = load_network(reservoir_dir);
  PretrainedReservoir reservoir;
  reservoir.params = std::move(params);
  reservoir.master_seed = meta.master_seed;
  reservoir.config_hash = meta.config_hash;

  const fs::path dir = fs::path(cfg.output_dir) / "multitask";
  require_fresh(dir / "weights.bin", g.force);

  std::map<TaskKind, TrainLog> logs;
  train_all_readouts(reservoir, cfg, g.threads, logs);
  save_network(reservoir.params, dir.string(),
               {reservoir.master_seed, reservoir.config_hash});
  for (const auto& [task, log] : logs)
    write_file(dir / ("readout_" + std::string(task_name(task)) + ".csv"),
               log.to_csv());
  const auto table = performance_table_csv(reservoir.params, cfg.task_list(),
                                           cfg.timing, cfg.master_seed);
  write_file(dir / "performance.csv", table);
  std::fputs(table.c_str(), stdout);
  return kExitOk;
}

int cmd_train_separate(const GlobalOpts& g) {
  const auto cfg = resolve_config(g);
  const auto tasks = cfg.task_list();
  const fs::path dir = fs::path(cfg.output_dir) / "separate";
  require_fresh(dir / "performance.csv", g.force);

  const RngStream master(cfg.master_seed);
  std::vector<NetworkParams> nets(tasks.size());
  std::vector<TrainLog> logs(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), g.threads, [&](int i) {
    auto rng = derive_stream(master, "baseline", i);
    auto [params, log] = train_separate_baseline(tasks[i], cfg.baseline_train(),
                                                 cfg.timing, rng, cfg.n, cfg.g,
                                                 cfg.noise);
    nets[i] = std::move(params);
    logs[i] = std::move(log);
  });

  std::string table = "task,percent,target_95_pass\n";
  char buf[128];
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const fs::path net_dir = dir / task_name(tasks[i]);
    save_network(nets[i], net_dir.string(),
                 {derive_seed(cfg.master_seed, "baseline", i), config_hash(cfg)});
    write_file(net_dir / "train.csv", logs[i].to_csv());
    const auto r = performance(nets[i], tasks[i], cfg.timing, cfg.master_seed);
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%s\n", task_name(tasks[i]),
                  r.percent, r.percent >= 95.0 ? "pass" : "fail");
    table += buf;
  }
  const auto counts = count_parameters(CountScheme::SeparateTraining, cfg.n,
                                       2, static_cast<int>(tasks.size()));
  table += "total_trained_parameters," + std::to_string(counts.trained_total) +
           ",\n";
  write_file(dir / "performance.csv", table);
  std::fputs(table.c_str(), stdout);
  return kExitOk;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& network_dir) {
  const auto cfg = resolve_config(g);
  auto [params, meta] = load_network(network_dir);
  std::string out = cfg.report_format == "json" ? "[" : "task,percent\n";
  bool first = true;
  for (TaskKind task : cfg.task_list()) {
    if (!params.has_readout(task)) continue;
    const auto r = performance(params, task, cfg.timing, cfg.master_seed);
    if (cfg.report_format == "json") {
      if (!first) out += ",";
      out += performance_to_json(r);
      first = false;
    } else {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s,%.17g\n", task_name(task), r.percent);
      out += buf;
    }
  }
  if (cfg.report_format == "json") out += "]\n";
  std::fputs(out.c_str(), stdout);
  return kExitOk;
}

int cmd_perturb(const GlobalOpts& g, const std::vector<std::string>& net_dirs) {
  const auto cfg = resolve_config(g);
  const fs::path dir = fs::path(cfg.output_dir) / "sweep";
  require_fresh(dir / "sweep.csv", g.force);

  std::vector<TrainedNetwork> nets;
  for (const auto& d : net_dirs) {
    auto [params, meta] = load_network(d);
    TrainedNetwork net;
    net.net_seed = meta.master_seed;
    net.modular = params.partition.num_modules() >= 3;
    net.params = std::move(params);
    nets.push_back(std::move(net));
  }

  const auto requested = cfg.task_list();
  SweepReport report;
  int sweeps_run = 0;
  for (const auto& net : nets) {
    std::vector<TaskKind> tasks;
    for (TaskKind t : requested) {
      if (net.params.has_readout(t))
        tasks.push_back(t);
      else
        std::fprintf(stderr, "warning: network %llu has no readout for %s; skipped\n",
                     static_cast<unsigned long long>(net.net_seed), task_name(t));
    }
    if (tasks.empty()) continue;
    for (PerturbKind kind : cfg.perturb_kinds) {
      auto sub = run_sweep({net}, tasks, {kind}, cfg.perturb_strengths.at(kind),
                           cfg.perturb_condition, cfg.n_draws, cfg.timing,
                           cfg.master_seed, cfg.target_module);
      report.rows.insert(report.rows.end(), sub.rows.begin(), sub.rows.end());
      ++sweeps_run;
    }
  }
  if (sweeps_run == 0) {
    std::fprintf(stderr, "error: no (network, task) pair had a readout\n");
    return kExitMissingInput;
  }
  report.canonical_sort();
  write_file(dir / "sweep.csv", report.to_csv());
  write_file(dir / "summary.json", report.summary_json());
  std::printf("%zu sweep rows written to %s\n", report.rows.size(),
              dir.string().c_str());
  return kExitOk;
}

int cmd_count_params(int n, int n_out, int n_tasks, bool as_json) {
  if (as_json) {
    std::printf("[%s,%s]\n",
                param_count_to_json(count_parameters(
                                        CountScheme::SeparateTraining, n, n_out,
                                        n_tasks))
                    .c_str(),
                param_count_to_json(count_parameters(
                                        CountScheme::ModularPrimitives, n,
                                        n_out, n_tasks))
                    .c_str());
  } else {
    std::fputs(param_count_table_csv(n, n_out, n_tasks).c_str(), stdout);
  }
  return kExitOk;
}

int cmd_reproduce(const GlobalOpts& g) {
  const auto cfg = resolve_config(g);
  const fs::path out = cfg.output_dir;
  require_fresh(out / "config.json", g.force);
  write_file(out / "config.json", config_to_json(cfg));

  // Modular reservoirs + readouts, one per network seed.
  std::vector<TrainedNetwork> sweep_nets;
  for (int i = 0; i < cfg.n_nets; ++i) {
    const std::uint64_t seed =
        i == 0 ? cfg.master_seed : derive_seed(cfg.master_seed, "reservoir", i);
    auto reservoir = pretrain_one(cfg, seed);
    save_reservoir(reservoir, out / ("reservoir_" + std::to_string(i)));
    std::map<TaskKind, TrainLog> logs;
    train_all_readouts(reservoir, cfg, g.threads, logs);
    const fs::path mdir = out / ("multitask_" + std::to_string(i));
    save_network(reservoir.params, mdir.string(), {seed, config_hash(cfg)});
    for (const auto& [task, log] : logs)
      write_file(mdir / ("readout_" + std::string(task_name(task)) + ".csv"),
                 log.to_csv());
    write_file(mdir / "performance.csv",
               performance_table_csv(reservoir.params, cfg.task_list(),
                                     cfg.timing, cfg.master_seed));
    TrainedNetwork net;
    net.net_seed = seed;
    net.modular = true;
    net.params = std::move(reservoir.params);
    sweep_nets.push_back(std::move(net));
    std::printf("network %d trained\n", i);
  }

  // Separate-training baselines.
  const auto tasks = cfg.task_list();
  const RngStream master(cfg.master_seed);
  std::vector<NetworkParams> baselines(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), g.threads, [&](int i) {
    auto rng = derive_stream(master, "baseline", i);
    baselines[i] = train_separate_baseline(tasks[i], cfg.baseline_train(), cfg.timing,
                                           rng, cfg.n, cfg.g, cfg.noise)
                       .first;
  });
  std::string sep_table = "task,percent\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const fs::path net_dir = out / "separate" / task_name(tasks[i]);
    save_network(baselines[i], net_dir.string(),
                 {derive_seed(cfg.master_seed, "baseline", i), config_hash(cfg)});
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.17g\n", task_name(tasks[i]),
                  performance(baselines[i], tasks[i], cfg.timing,
                              cfg.master_seed)
                      .percent);
    sep_table += buf;
    TrainedNetwork net;
    net.net_seed = derive_seed(cfg.master_seed, "baseline", i);
    net.modular = false;
    net.params = std::move(baselines[i]);
    sweep_nets.push_back(std::move(net));
  }
  write_file(out / "separate" / "performance.csv", sep_table);
  std::printf("baselines trained\n");

  write_file(out / "param_counts.csv", param_count_table_csv(300, 2, 9));

  // Perturbation sweep across everything trained above.
  SweepReport report;
  for (const auto& net : sweep_nets) {
    std::vector<TaskKind> net_tasks;
    for (TaskKind t : tasks)
      if (net.params.has_readout(t)) net_tasks.push_back(t);
    for (PerturbKind kind : cfg.perturb_kinds) {
      auto sub = run_sweep({net}, net_tasks, {kind},
                           cfg.perturb_strengths.at(kind), cfg.perturb_condition,
                           cfg.n_draws, cfg.timing, cfg.master_seed,
                           cfg.target_module);
      report.rows.insert(report.rows.end(), sub.rows.begin(), sub.rows.end());
    }
  }
  report.canonical_sort();
  write_file(out / "sweep" / "sweep.csv", report.to_csv());
  write_file(out / "sweep" / "summary.json", report.summary_json());
  std::printf("reproduce complete: %s\n", out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular task-primitive RNN experiments"};
  app.require_subcommand(1);

  GlobalOpts g;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", g.config_path, "experiment config JSON");
    cmd->add_option("--seed", g.seed_override, "master seed override")
        ->each([&](const std::string&) { g.has_seed = true; });
    cmd->add_option("--out", g.out_override, "output directory override");
    cmd->add_flag("--force", g.force, "overwrite existing outputs");
    cmd->add_option("--threads", g.threads, "worker threads");
    cmd->add_option("--format", g.format, "report format: csv|json");
  };

  auto* pretrain = app.add_subcommand("pretrain", "pretrain modular reservoir");
  add_common(pretrain);

  auto* readouts =
      app.add_subcommand("train-readouts", "train per-task readouts");
  add_common(readouts);
  std::string reservoir_dir;
  readouts->add_option("reservoir", reservoir_dir, "reservoir directory")
      ->required();

  auto* separate =
      app.add_subcommand("train-separate", "train per-task baselines");
  add_common(separate);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a trained network");
  add_common(evaluate);
  std::string network_dir;
  evaluate->add_option("network", network_dir, "network directory")->required();

  auto* perturb = app.add_subcommand("perturb", "run perturbation sweep");
  add_common(perturb);
  std::vector<std::string> net_dirs;
  perturb->add_option("networks", net_dirs, "network directories")->required();

  auto* count = app.add_subcommand("count-params", "parameter accounting");
  int cp_n = 300, cp_out = 2, cp_tasks = 9;
  bool cp_json = false;
  count->add_option("--n", cp_n, "network size");
  count->add_option("--n-out", cp_out, "readout units");
  count->add_option("--n-tasks", cp_tasks, "number of tasks");
  count->add_flag("--json", cp_json, "machine-readable output");

  auto* reproduce =
      app.add_subcommand("reproduce", "full pipeline: pretrain, readouts, "
                         "baselines, perturbation sweep");
  add_common(reproduce);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) return cmd_pretrain(g);
    if (readouts->parsed()) return cmd_train_readouts(g, reservoir_dir);
    if (separate->parsed()) return cmd_train_separate(g);
    if (evaluate->parsed()) return cmd_evaluate(g, network_dir);
    if (perturb->parsed()) return cmd_perturb(g, net_dirs);
    if (count->parsed()) return cmd_count_params(cp_n, cp_out, cp_tasks, cp_json);
    if (reproduce->parsed()) return cmd_reproduce(g);
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingInput;
  }
  return kExitOk;
}
