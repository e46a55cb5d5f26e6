#include "mtp/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace mtp {

const char* perturb_kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::LesionWeights: return "lesion_weights";
    case PerturbKind::SilenceUnits: return "silence_units";
    case PerturbKind::GlobalWeightNoise: return "global_weight_noise";
    case PerturbKind::InputNoise: return "input_noise";
  }
  return "?";
}

PerturbKind perturb_kind_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    const auto k = static_cast<PerturbKind>(i);
    if (name == perturb_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown perturbation kind: " + name);
}

const char* perturb_condition_name(PerturbCondition c) {
  return c == PerturbCondition::WholeNetwork ? "whole_network" : "modular";
}

PerturbCondition perturb_condition_from_name(const std::string& name) {
  if (name == "whole_network") return PerturbCondition::WholeNetwork;
  if (name == "modular") return PerturbCondition::Modular;
  throw std::invalid_argument("unknown perturbation condition: " + name);
}

void PerturbationSpec::validate() const {
  const bool fractional =
      kind == PerturbKind::LesionWeights || kind == PerturbKind::SilenceUnits;
  if (fractional && (strength < 0.0 || strength > 1.0))
    throw std::invalid_argument("perturbation: fraction must be in [0,1]");
  if (!fractional && strength < 0.0)
    throw std::invalid_argument("perturbation: sigma must be >= 0");
}

namespace {

// First k elements of a Fisher-Yates partial shuffle: a uniform sample
// without replacement, deterministic given the stream.
std::vector<int> sample_without_replacement(int count, int k, RngStream& rng) {
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, count - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

EvalContext apply_perturbation(const NetworkParams& params,
                               const PerturbationSpec& spec, RngStream& rng,
                               const std::pair<int, int>* unit_range) {
  spec.validate();
  EvalContext ctx;
  ctx.params = params;
  const int n = params.n;

  std::pair<int, int> range{0, n};
  if (spec.condition == PerturbCondition::Modular) {
    range = unit_range ? *unit_range : params.partition.range(spec.target_module);
  }
  const int units = range.second - range.first;

  switch (spec.kind) {
    case PerturbKind::LesionWeights: {
      const long long candidates = static_cast<long long>(units) * units;
      const int k = static_cast<int>(std::floor(spec.strength * candidates));
      const auto picks = sample_without_replacement(static_cast<int>(candidates), k, rng);
      for (int p : picks) {
        const int i = range.first + p / units;
        const int j = range.first + p % units;
        ctx.params.w_rec(i, j) = 0.0;
      }
      break;
    }
    case PerturbKind::SilenceUnits: {
      const int k = static_cast<int>(std::floor(spec.strength * units));
      const auto picks = sample_without_replacement(units, k, rng);
      if (k > 0) {
        ctx.silenced.assign(n, 0);
        for (int p : picks) ctx.silenced[range.first + p] = 1;
      }
      break;
    }
    case PerturbKind::GlobalWeightNoise: {
      if (spec.strength > 0)
        for (int i = range.first; i < range.second; ++i)
          for (int j = range.first; j < range.second; ++j)
            ctx.params.w_rec(i, j) += rng.gaussian(0.0, spec.strength);
      break;
    }
    case PerturbKind::InputNoise: {
      ctx.input_noise_sigma = spec.strength;
      break;
    }
  }
  return ctx;
}

void SweepReport::canonical_sort() {
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    auto key = [](const SweepRow& r) {
      return std::tuple(r.net_seed, static_cast<int>(r.task),
                        static_cast<int>(r.kind), static_cast<int>(r.condition),
                        r.target_module, r.strength, r.draw_seed);
    };
    return key(a) < key(b);
  });
}

std::string SweepReport::to_csv() const {
  std::string out =
      "net_seed,task,kind,condition,target_module,strength,draw_seed,"
      "performance_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%s,%s,%d,%.17g,%llu,%.17g\n",
                  static_cast<unsigned long long>(r.net_seed),
                  task_name(r.task), perturb_kind_name(r.kind),
                  perturb_condition_name(r.condition), r.target_module,
                  r.strength, static_cast<unsigned long long>(r.draw_seed),
                  r.performance_pct);
    out += buf;
  }
  return out;
}

std::string SweepReport::summary_json() const {
  // Cells aggregate across draws and networks.
  std::map<std::tuple<int, int, int, int, double>, std::vector<double>> cells;
  for (const auto& r : rows)
    cells[{static_cast<int>(r.task), static_cast<int>(r.kind),
           static_cast<int>(r.condition), r.target_module, r.strength}]
        .push_back(r.performance_pct);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, vals] : cells) {
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd =
        vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    arr.push_back(
        {{"task", task_name(static_cast<TaskKind>(std::get<0>(key)))},
         {"kind", perturb_kind_name(static_cast<PerturbKind>(std::get<1>(key)))},
         {"condition",
          perturb_condition_name(static_cast<PerturbCondition>(std::get<2>(key)))},
         {"target_module", std::get<3>(key)},
         {"strength", std::get<4>(key)},
         {"n", vals.size()},
         {"mean", mean},
         {"std", sd}});
  }
  return nlohmann::json{{"cells", arr}}.dump(2);
}

SweepReport run_sweep(const std::vector<TrainedNetwork>& networks,
                      const std::vector<TaskKind>& tasks,
                      const std::vector<PerturbKind>& kinds,
                      const std::vector<double>& strengths,
                      PerturbCondition condition, int n_draws,
                      const TrialTiming& timing, std::uint64_t master_seed,
                      int target_module, int test_trials) {
  for (const auto& net : networks)
    for (TaskKind task : tasks)
      if (!net.params.has_readout(task))
        throw std::invalid_argument(
            std::string("run_sweep: network ") + std::to_string(net.net_seed) +
            " has no readout for task " + task_name(task));

  SweepReport report;
  const RngStream master(master_seed);
  for (std::size_t ni = 0; ni < networks.size(); ++ni) {
    const auto& net = networks[ni];
    // Keyed by the network's own seed so per-network runs compose into the
    // same report as one combined run.
    const auto net_rng = derive_stream(master, "net", net.net_seed);

    // Pseudo-modules for non-modular networks in the Modular condition:
    // 5 random contiguous ranges of target-module size, re-drawn per network.
    std::vector<std::pair<int, int>> ranges;
    if (condition == PerturbCondition::Modular) {
      if (net.modular) {
        ranges.push_back(net.params.partition.range(target_module));
      } else {
        auto range_rng = derive_stream(net_rng, "pseudo_modules", 0);
        ModulePartition ref;
        const int size = std::min(ref.sizes[target_module], net.params.n);
        for (int r = 0; r < 5; ++r) {
          const int begin = static_cast<int>(
              range_rng.uniform_int(0, net.params.n - size));
          ranges.emplace_back(begin, begin + size);
        }
      }
    }

    for (TaskKind task : tasks)
      for (PerturbKind kind : kinds)
        for (double strength : strengths)
          for (int draw = 0; draw < n_draws; ++draw) {
            PerturbationSpec spec;
            spec.kind = kind;
            spec.strength = strength;
            spec.condition = condition;
            spec.target_module = target_module;
            spec.net_seed = net.net_seed;

            const std::uint64_t cell_seed = derive_seed(
                derive_seed(net_rng.seed(), task_name(task),
                            static_cast<std::uint64_t>(kind)),
                "draw",
                static_cast<std::uint64_t>(draw) * 1000003 +
                    static_cast<std::uint64_t>(strength * 1e6));
            spec.draw_seed = cell_seed;

            double pct = 0;
            if (condition == PerturbCondition::Modular) {
              for (std::size_t r = 0; r < ranges.size(); ++r) {
                RngStream draw_rng(derive_seed(cell_seed, "range", r));
                auto ctx = apply_perturbation(net.params, spec, draw_rng, &ranges[r]);
                RngStream noise_rng(derive_seed(cell_seed, "input_noise", r));
                pct += performance(ctx.params, task, timing, master_seed,
                                   test_trials, ctx.overlay(), &noise_rng)
                           .percent;
              }
              pct /= static_cast<double>(ranges.size());
            } else {
              RngStream draw_rng(derive_seed(cell_seed, "apply", 0));
              auto ctx = apply_perturbation(net.params, spec, draw_rng);
              RngStream noise_rng(derive_seed(cell_seed, "input_noise", 0));
              pct = performance(ctx.params, task, timing, master_seed,
                                test_trials, ctx.overlay(), &noise_rng)
                        .percent;
            }
            report.rows.push_back({net.net_seed, task, kind, condition,
                                   target_module, strength, cell_seed, pct});
          }
  }
  report.canonical_sort();
  return report;
}

}  // namespace mtp
