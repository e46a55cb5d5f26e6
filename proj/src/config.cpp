#include "mtp/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace mtp {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::vector<TaskKind> ExperimentConfig::task_list() const {
  if (tasks.empty()) return all_tasks();
  std::vector<TaskKind> out;
  for (const auto& name : tasks) out.push_back(task_from_name(name));
  return out;
}

void ExperimentConfig::validate() const {
  if (partition().total() != n)
    throw std::invalid_argument("config: module_sizes must sum to n");
  if (g <= 0) throw std::invalid_argument("config: g must be > 0");
  timing.validate();
  train.validate();
  readout_train().validate();
  baseline_train().validate();
  if (noise.input_noise_sigma < 0 || noise.state_noise_sigma < 0)
    throw std::invalid_argument("config: noise sigmas must be >= 0");
  for (const auto& t : tasks)
    if (is_primitive(task_from_name(t)))
      throw std::invalid_argument("config: tasks must not include primitives");
  if (target_module < 0 ||
      target_module >= static_cast<int>(module_sizes.size()))
    throw std::invalid_argument("config: target_module out of range");
  if (n_draws < 1 || n_nets < 1)
    throw std::invalid_argument("config: n_draws and n_nets must be >= 1");
  if (report_format != "csv" && report_format != "json")
    throw std::invalid_argument("config: report_format must be csv or json");
  for (PerturbKind k : perturb_kinds) {
    const auto it = perturb_strengths.find(k);
    if (it == perturb_strengths.end() || it->second.empty())
      throw std::invalid_argument(std::string("config: no strengths for ") +
                                  perturb_kind_name(k));
    for (double s : it->second) {
      PerturbationSpec spec;
      spec.kind = k;
      spec.strength = s;
      spec.validate();
    }
  }
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;

  check_keys(j, "root",
             {"master_seed", "network", "timing", "train", "noise", "tasks",
              "perturbation", "output_dir", "report_format"});
  get_if(j, "master_seed", cfg.master_seed);
  get_if(j, "output_dir", cfg.output_dir);
  get_if(j, "report_format", cfg.report_format);
  get_if(j, "tasks", cfg.tasks);

  if (j.contains("network")) {
    const auto& net = j.at("network");
    check_keys(net, "network", {"n", "module_sizes", "connectivity", "g"});
    get_if(net, "n", cfg.n);
    get_if(net, "module_sizes", cfg.module_sizes);
    if (net.contains("connectivity"))
      cfg.connectivity =
          connectivity_from_name(net.at("connectivity").get<std::string>());
    get_if(net, "g", cfg.g);
  }

  if (j.contains("timing")) {
    const auto& t = j.at("timing");
    check_keys(t, "timing",
               {"dt_ms", "total_steps", "fixation_steps", "stimulus_onset_step",
                "response_steps", "pulse_width_steps", "pulse_gap_steps"});
    get_if(t, "dt_ms", cfg.timing.dt_ms);
    get_if(t, "total_steps", cfg.timing.total_steps);
    get_if(t, "fixation_steps", cfg.timing.fixation_steps);
    get_if(t, "stimulus_onset_step", cfg.timing.stimulus_onset_step);
    get_if(t, "response_steps", cfg.timing.response_steps);
    get_if(t, "pulse_width_steps", cfg.timing.pulse_width_steps);
    get_if(t, "pulse_gap_steps", cfg.timing.pulse_gap_steps);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train",
               {"learning_rate", "readout_learning_rate", "batch_trials",
                "iterations", "baseline_iterations", "l2_weight",
                "activity_reg", "lr_decay_after", "lr_decay_factor",
                "adam_beta1", "adam_beta2", "adam_eps"});
    get_if(t, "learning_rate", cfg.train.learning_rate);
    get_if(t, "readout_learning_rate", cfg.readout_learning_rate);
    get_if(t, "baseline_iterations", cfg.baseline_iterations);
    get_if(t, "batch_trials", cfg.train.batch_trials);
    get_if(t, "iterations", cfg.train.iterations);
    get_if(t, "l2_weight", cfg.train.l2_weight);
    get_if(t, "activity_reg", cfg.train.activity_reg);
    get_if(t, "lr_decay_after", cfg.train.lr_decay_after);
    get_if(t, "lr_decay_factor", cfg.train.lr_decay_factor);
    get_if(t, "adam_beta1", cfg.train.adam_beta1);
    get_if(t, "adam_beta2", cfg.train.adam_beta2);
    get_if(t, "adam_eps", cfg.train.adam_eps);
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "noise", {"input_noise_sigma", "state_noise_sigma", "enabled"});
    get_if(n, "input_noise_sigma", cfg.noise.input_noise_sigma);
    get_if(n, "state_noise_sigma", cfg.noise.state_noise_sigma);
    get_if(n, "enabled", cfg.noise.enabled);
  }

  if (j.contains("perturbation")) {
    const auto& p = j.at("perturbation");
    check_keys(p, "perturbation",
               {"kinds", "strengths", "condition", "target_module", "n_draws",
                "n_nets"});
    if (p.contains("kinds")) {
      cfg.perturb_kinds.clear();
      for (const auto& k : p.at("kinds"))
        cfg.perturb_kinds.push_back(
            perturb_kind_from_name(k.get<std::string>()));
    }
    if (p.contains("strengths")) {
      for (const auto& [key, val] : p.at("strengths").items())
        cfg.perturb_strengths[perturb_kind_from_name(key)] =
            val.get<std::vector<double>>();
    }
    if (p.contains("condition"))
      cfg.perturb_condition =
          perturb_condition_from_name(p.at("condition").get<std::string>());
    get_if(p, "target_module", cfg.target_module);
    get_if(p, "n_draws", cfg.n_draws);
    get_if(p, "n_nets", cfg.n_nets);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json strengths;
  for (const auto& [k, v] : cfg.perturb_strengths)
    strengths[perturb_kind_name(k)] = v;
  json kinds = json::array();
  for (PerturbKind k : cfg.perturb_kinds) kinds.push_back(perturb_kind_name(k));

  json j{
      {"master_seed", cfg.master_seed},
      {"network",
       {{"n", cfg.n},
        {"module_sizes", cfg.module_sizes},
        {"connectivity", connectivity_name(cfg.connectivity)},
        {"g", cfg.g}}},
      {"timing",
       {{"dt_ms", cfg.timing.dt_ms},
        {"total_steps", cfg.timing.total_steps},
        {"fixation_steps", cfg.timing.fixation_steps},
        {"stimulus_onset_step", cfg.timing.stimulus_onset_step},
        {"response_steps", cfg.timing.response_steps},
        {"pulse_width_steps", cfg.timing.pulse_width_steps},
        {"pulse_gap_steps", cfg.timing.pulse_gap_steps}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"readout_learning_rate", cfg.readout_learning_rate},
        {"baseline_iterations", cfg.baseline_iterations},
        {"batch_trials", cfg.train.batch_trials},
        {"iterations", cfg.train.iterations},
        {"l2_weight", cfg.train.l2_weight},
        {"activity_reg", cfg.train.activity_reg},
        {"lr_decay_after", cfg.train.lr_decay_after},
        {"lr_decay_factor", cfg.train.lr_decay_factor},
        {"adam_beta1", cfg.train.adam_beta1},
        {"adam_beta2", cfg.train.adam_beta2},
        {"adam_eps", cfg.train.adam_eps}}},
      {"noise",
       {{"input_noise_sigma", cfg.noise.input_noise_sigma},
        {"state_noise_sigma", cfg.noise.state_noise_sigma},
        {"enabled", cfg.noise.enabled}}},
      {"tasks", cfg.tasks},
      {"perturbation",
       {{"kinds", kinds},
        {"strengths", strengths},
        {"condition", perturb_condition_name(cfg.perturb_condition)},
        {"target_module", cfg.target_module},
        {"n_draws", cfg.n_draws},
        {"n_nets", cfg.n_nets}}},
      {"output_dir", cfg.output_dir},
      {"report_format", cfg.report_format}};
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mtp
