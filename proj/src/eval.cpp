#include "mtp/eval.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace mtp {
namespace {

double circular_distance(double a, double b) {
  const double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(std::fabs(a - b), two_pi);
  return d > std::numbers::pi ? two_pi - d : d;
}

}  // namespace

bool decode_decision(const Trial& trial, const Matrix& outputs) {
  int resp_count = 0;
  for (auto m : trial.response_mask) resp_count += m;
  if (resp_count == 0)
    throw std::invalid_argument("decode_decision: empty response period");
  if (outputs.rows != static_cast<int>(trial.response_mask.size()))
    throw std::invalid_argument("decode_decision: output length mismatch");

  const auto& gt = trial.ground_truth;
  switch (gt.kind) {
    case GroundTruth::Kind::Angle: {
      if (outputs.cols < 3)
        throw std::invalid_argument("decode_decision: need cos/sin outputs");
      double mc = 0, ms = 0;
      for (int t = 0; t < outputs.rows; ++t) {
        if (!trial.response_mask[t]) continue;
        mc += outputs(t, 1);
        ms += outputs(t, 2);
      }
      mc /= resp_count;
      ms /= resp_count;
      if (mc == 0.0 && ms == 0.0) return false;  // degenerate decode
      const double decoded = std::atan2(ms, mc);
      return circular_distance(decoded, gt.angle) <= kDecisionAngleTol;
    }
    case GroundTruth::Kind::Scalar: {
      if (outputs.cols < 2)
        throw std::invalid_argument("decode_decision: need value output");
      double v = 0;
      for (int t = 0; t < outputs.rows; ++t)
        if (trial.response_mask[t]) v += outputs(t, 1);
      v /= resp_count;
      return std::fabs(v - gt.target) < std::fabs(v - gt.distractor);
    }
    case GroundTruth::Kind::None:
      throw std::invalid_argument("decode_decision: trial has no decision");
  }
  return false;
}

PerformanceResult performance(const NetworkParams& params, TaskKind task,
                              const TrialTiming& timing, std::uint64_t test_seed,
                              int n_trials, const ForwardOverlay& overlay,
                              RngStream* overlay_noise_rng) {
  if (!params.has_readout(task))
    throw std::invalid_argument(std::string("performance: missing readout for ") +
                                task_name(task));
  const RngStream task_rng(
      derive_seed(test_seed, "test", static_cast<std::uint64_t>(task)));
  const auto trials = generate_batch(task, timing, n_trials, task_rng);

  PerformanceResult res;
  res.task = task;
  res.n_trials = n_trials;

  // Batched noiseless rollout across the whole test set; the only stochastic
  // element is an InputNoise perturbation, drawn from per-trial sub-streams.
  const int B = n_trials;
  const int T = timing.total_steps;
  const int n = params.n;
  const int n_out = task_metadata(task).n_out;
  const double extra_in = overlay.extra_input_noise_sigma;
  const std::uint64_t noise_salt =
      (extra_in > 0 && overlay_noise_rng) ? overlay_noise_rng->next_u64() : 0;

  std::vector<Eigen::MatrixXd> x(T, Eigen::MatrixXd(B, kNumInputChannels));
  for (int b = 0; b < B; ++b) {
    RngStream trial_noise(derive_seed(noise_salt, "trial", b));
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < kNumInputChannels; ++c) {
        double v = trials[b].inputs(t, c);
        if (extra_in > 0) v += trial_noise.gaussian(0.0, extra_in);
        x[t](b, c) = v;
      }
  }

  auto w_rec = params.w_rec.map();
  auto w_in = params.w_in.map();
  auto w_out = params.readouts.at(task).map();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(B, n);
  std::vector<Matrix> outputs(B, Matrix(T, n_out));
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd a = h * w_rec.transpose() + x[t] * w_in.transpose();
    h = a.array().tanh();
    if (overlay.silenced)
      for (int i = 0; i < n; ++i)
        if ((*overlay.silenced)[i]) h.col(i).setZero();
    const Eigen::MatrixXd y = h * w_out.transpose();
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < n_out; ++k) outputs[b](t, k) = y(b, k);
  }
  for (int b = 0; b < B; ++b)
    if (decode_decision(trials[b], outputs[b])) res.n_correct += 1;
  res.percent = 100.0 * res.n_correct / n_trials;
  return res;
}

ParamCount count_parameters(CountScheme scheme, int n, int n_out, int n_tasks,
                            const ModulePartition* partition,
                            bool include_input_weights) {
  if (n < 1 || n_out < 1 || n_tasks < 0)
    throw std::invalid_argument("count_parameters: bad arguments");
  ParamCount c;
  c.scheme = scheme;
  c.n = n;
  c.n_out = n_out;
  c.n_tasks = n_tasks;
  const long long nn = static_cast<long long>(n) * n;
  const long long readout = static_cast<long long>(n_out) * n;
  const long long in_w = include_input_weights
                             ? static_cast<long long>(n) * kNumInputChannels
                             : 0;
  if (scheme == CountScheme::SeparateTraining) {
    const long long per_net = nn + readout + in_w;
    c.overall = n_tasks * per_net;
    c.trained_total = c.overall;
    c.trained_per_task = per_net;
  } else {
    c.overall = nn + n_tasks * readout + in_w;
    if (partition) {
      long long blocks = 0;
      for (int s : partition->sizes) blocks += static_cast<long long>(s) * s;
      // Routed input weights: one channel per module under the disconnected
      // routing, i.e. one trained input weight per unit.
      const long long routed = include_input_weights ? n : 0;
      c.trained_total = blocks + routed + n_tasks * readout;
    } else {
      c.trained_total = c.overall;
    }
    c.trained_per_task = readout;
  }
  return c;
}

std::string performance_to_json(const PerformanceResult& r) {
  nlohmann::json j{{"task", task_name(r.task)},
                   {"n_trials", r.n_trials},
                   {"n_correct", r.n_correct},
                   {"percent", r.percent}};
  return j.dump();
}

std::string param_count_to_json(const ParamCount& c) {
  nlohmann::json j{
      {"scheme", c.scheme == CountScheme::SeparateTraining ? "separate"
                                                           : "modular"},
      {"n", c.n},
      {"n_out", c.n_out},
      {"n_tasks", c.n_tasks},
      {"overall", c.overall},
      {"trained_total", c.trained_total},
      {"trained_per_task", c.trained_per_task}};
  return j.dump();
}

std::string param_count_table_csv(int n, int n_out, int n_tasks) {
  const auto sep =
      count_parameters(CountScheme::SeparateTraining, n, n_out, n_tasks);
  const auto mod =
      count_parameters(CountScheme::ModularPrimitives, n, n_out, n_tasks);
  std::string out = "counts,separate_training,modular_task_primitives\n";
  out += "overall," + std::to_string(sep.overall) + "," +
         std::to_string(mod.overall) + "\n";
  out += "number_trained," + std::to_string(sep.trained_total) + "," +
         std::to_string(mod.trained_total) + "\n";
  out += "per_task," + std::to_string(sep.trained_per_task) + "," +
         std::to_string(mod.trained_per_task) + "\n";
  return out;
}

}  // namespace mtp
