#include "mtp/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mtp {

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("cfg: learning_rate <= 0");
  if (batch_trials < 1) throw std::invalid_argument("cfg: batch_trials < 1");
  if (iterations < 0) throw std::invalid_argument("cfg: iterations < 0");
  if (l2_weight < 0 || activity_reg < 0)
    throw std::invalid_argument("cfg: regularizers must be >= 0");
  if (lr_decay_after < 0 || lr_decay_factor <= 0)
    throw std::invalid_argument("cfg: bad lr decay");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1 ||
      adam_eps <= 0)
    throw std::invalid_argument("cfg: bad Adam constants");
}

bool GradMask::any_rec_or_in() const {
  for (auto v : rec)
    if (v) return true;
  for (auto v : in)
    if (v) return true;
  return false;
}

GradMask GradMask::full(int n) {
  GradMask m;
  m.n = n;
  m.rec.assign(static_cast<std::size_t>(n) * n, 1);
  m.in.assign(static_cast<std::size_t>(n) * kNumInputChannels, 1);
  m.out = true;
  return m;
}

GradMask GradMask::readout_only(int n) {
  GradMask m;
  m.n = n;
  m.rec.assign(static_cast<std::size_t>(n) * n, 0);
  m.in.assign(static_cast<std::size_t>(n) * kNumInputChannels, 0);
  m.out = true;
  return m;
}

GradMask GradMask::module_block(const ModulePartition& partition, int mod,
                                Connectivity connectivity) {
  const int n = partition.total();
  GradMask m = readout_only(n);
  const auto [begin, end] = partition.range(mod);
  m.out_cols.assign(static_cast<std::size_t>(n), 0);
  for (int i = begin; i < end; ++i) m.out_cols[i] = 1;
  for (int i = begin; i < end; ++i) {
    for (int j = begin; j < end; ++j) m.rec_at(i, j) = 1;
    if (connectivity == Connectivity::Connected) {
      for (int c = 0; c < kNumInputChannels; ++c) m.in_at(i, c) = 1;
    } else if (mod < kNumInputChannels) {
      m.in_at(i, mod) = 1;  // routed channel only
    }
  }
  return m;
}

GradMask GradMask::off_diagonal(const ModulePartition& partition) {
  const int n = partition.total();
  GradMask m = readout_only(n);
  m.out = false;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (partition.module_of(i) != partition.module_of(j)) m.rec_at(i, j) = 1;
  return m;
}

std::string TrainLog::to_csv() const {
  std::string out = "iteration,loss,learning_rate,wall_ms\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.3f\n", e.iteration,
                  e.loss, e.learning_rate, e.wall_ms);
    out += buf;
  }
  return out;
}

AdamState AdamState::zeros(int n, int n_out) {
  AdamState s;
  s.m_rec = Matrix(n, n);
  s.v_rec = Matrix(n, n);
  s.m_in = Matrix(n, kNumInputChannels);
  s.v_in = Matrix(n, kNumInputChannels);
  s.m_out = Matrix(n_out, n);
  s.v_out = Matrix(n_out, n);
  return s;
}

namespace {

double masked_l2_sum(const NetworkParams& params, TaskKind task,
                     const GradMask* mask) {
  double s = 0;
  const auto& rec = params.w_rec.data;
  const auto& in = params.w_in.data;
  if (mask) {
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (mask->rec[i]) s += rec[i] * rec[i];
    for (std::size_t i = 0; i < in.size(); ++i)
      if (mask->in[i]) s += in[i] * in[i];
  } else {
    for (double v : rec) s += v * v;
    for (double v : in) s += v * v;
  }
  if (!mask || mask->out) {
    const auto it = params.readouts.find(task);
    if (it != params.readouts.end())
      for (double v : it->second.data) s += v * v;
  }
  return s;
}

// Batched forward pass with stored states, used by BPTT. Noise is drawn from
// one sub-stream per trial in the same per-step order as network::forward.
struct BatchRollout {
  int B, T, n, n_out;
  std::vector<Eigen::MatrixXd> x;  // per step: B x 3 (noisy inputs)
  std::vector<Eigen::MatrixXd> h;  // per step: B x n (h_{t+1})
  std::vector<Eigen::MatrixXd> y;  // per step: B x n_out
  std::vector<Eigen::MatrixXd> z;  // per step: B x n_out (targets)
};

BatchRollout batch_forward(const NetworkParams& params, TaskKind task,
                           const std::vector<Trial>& batch,
                           const NoiseConfig& noise, RngStream& rng) {
  const int B = static_cast<int>(batch.size());
  const int T = batch[0].inputs.rows;
  const int n = params.n;
  const int n_out = task_metadata(task).n_out;
  const auto it = params.readouts.find(task);
  if (it == params.readouts.end())
    throw std::invalid_argument("batch_forward: missing readout");

  BatchRollout r;
  r.B = B;
  r.T = T;
  r.n = n;
  r.n_out = n_out;
  r.x.assign(T, Eigen::MatrixXd(B, kNumInputChannels));
  r.z.assign(T, Eigen::MatrixXd(B, n_out));

  const double in_sigma = noise.enabled ? noise.input_noise_sigma : 0.0;
  const double st_sigma = noise.enabled ? noise.state_noise_sigma : 0.0;

  std::vector<Eigen::MatrixXd> eta;
  if (st_sigma > 0) eta.assign(T, Eigen::MatrixXd::Zero(B, n));

  for (int b = 0; b < B; ++b) {
    const Trial& trial = batch[b];
    if (trial.inputs.rows != T || trial.targets.cols != n_out)
      throw std::invalid_argument("batch_forward: inhomogeneous batch");
    auto trial_rng = derive_stream(rng, "trial", b);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kNumInputChannels; ++c) {
        double v = trial.inputs(t, c);
        if (in_sigma > 0) v += trial_rng.gaussian(0.0, in_sigma);
        r.x[t](b, c) = v;
      }
      if (st_sigma > 0)
        for (int i = 0; i < n; ++i) eta[t](b, i) = trial_rng.gaussian(0.0, st_sigma);
      for (int k = 0; k < n_out; ++k) r.z[t](b, k) = trial.targets(t, k);
    }
  }

  auto w_rec = params.w_rec.map();
  auto w_in = params.w_in.map();
  auto w_out = it->second.map();

  r.h.assign(T, Eigen::MatrixXd(B, n));
  r.y.assign(T, Eigen::MatrixXd(B, n_out));
  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(B, n);
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd a = h_prev * w_rec.transpose() + r.x[t] * w_in.transpose();
    if (st_sigma > 0) a += eta[t];
    r.h[t] = a.array().tanh();
    r.y[t].noalias() = r.h[t] * w_out.transpose();
    h_prev = r.h[t];
  }
  return r;
}

}  // namespace

double compute_loss(const Matrix& outputs, const Matrix& targets,
                    const Matrix& states, const NetworkParams& params,
                    TaskKind task, const TrainConfig& cfg,
                    const GradMask* mask) {
  if (!outputs.same_shape(targets))
    throw std::invalid_argument("compute_loss: outputs/targets shape mismatch");
  double se = 0;
  for (std::size_t i = 0; i < outputs.data.size(); ++i) {
    const double d = outputs.data[i] - targets.data[i];
    se += d * d;
  }
  double loss = se / static_cast<double>(outputs.data.size());
  loss += cfg.l2_weight * masked_l2_sum(params, task, mask);
  if (!states.data.empty()) {
    double act = 0;
    for (double v : states.data) act += v * v;
    loss += cfg.activity_reg * act / static_cast<double>(states.data.size());
  }
  return loss;
}

Gradients bptt_gradients(const NetworkParams& params, TaskKind task,
                         const std::vector<Trial>& batch, const GradMask& mask,
                         const TrainConfig& cfg, const NoiseConfig& noise,
                         RngStream& rng) {
  if (batch.empty()) throw std::invalid_argument("bptt: empty batch");
  auto r = batch_forward(params, task, batch, noise, rng);
  const int B = r.B, T = r.T, n = r.n, n_out = r.n_out;
  const double data_norm = 1.0 / (static_cast<double>(B) * T * n_out);
  const double act_norm = 1.0 / (static_cast<double>(B) * T * n);

  Gradients g;
  g.d_rec = Matrix(n, n);
  g.d_in = Matrix(n, kNumInputChannels);
  g.d_out = Matrix(n_out, params.n);

  // Loss value: mean squared error + activity term + l2 over trainable weights.
  double se = 0, act = 0;
  for (int t = 0; t < T; ++t) {
    se += (r.y[t] - r.z[t]).squaredNorm();
    act += r.h[t].squaredNorm();
  }
  g.loss = se * data_norm + cfg.activity_reg * act * act_norm +
           cfg.l2_weight * masked_l2_sum(params, task, &mask);

  auto w_rec = params.w_rec.map();
  auto w_out = params.readouts.at(task).map();

  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n_out, n);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd dy = 2.0 * data_norm * (r.y[t] - r.z[t]);
    d_out.noalias() += dy.transpose() * r.h[t];
  }

  // Recurrent backward pass is skipped when no recurrent or input entry is
  // trainable; those gradients would be zeroed by the mask anyway.
  if (mask.any_rec_or_in()) {
    Eigen::MatrixXd d_rec = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(n, kNumInputChannels);
    Eigen::MatrixXd e_next;  // E_{t+1}, B x n
    for (int t = T - 1; t >= 0; --t) {
      Eigen::MatrixXd dh = 2.0 * data_norm * (r.y[t] - r.z[t]) * w_out;
      dh += (2.0 * cfg.activity_reg * act_norm) * r.h[t];
      if (t < T - 1) dh.noalias() += e_next * w_rec;
      const Eigen::MatrixXd e =
          dh.array() * (1.0 - r.h[t].array().square());
      if (t > 0)
        d_rec.noalias() += e.transpose() * r.h[t - 1];
      // h_0 = 0 contributes nothing to d_rec.
      d_in.noalias() += e.transpose() * r.x[t];
      e_next = e;
    }
    MatMap(g.d_rec.data.data(), n, n) = d_rec;
    MatMap(g.d_in.data.data(), n, kNumInputChannels) = d_in;
  }
  MatMap(g.d_out.data.data(), n_out, n) = d_out;

  // L2 gradient on trainable entries, then mask everything (spec: full
  // gradient first, zeroed after).
  const auto& wr = params.w_rec.data;
  const auto& wi = params.w_in.data;
  for (std::size_t i = 0; i < wr.size(); ++i) {
    g.d_rec.data[i] += 2.0 * cfg.l2_weight * wr[i];
    if (!mask.rec[i]) g.d_rec.data[i] = 0.0;
  }
  for (std::size_t i = 0; i < wi.size(); ++i) {
    g.d_in.data[i] += 2.0 * cfg.l2_weight * wi[i];
    if (!mask.in[i]) g.d_in.data[i] = 0.0;
  }
  const auto& wo = params.readouts.at(task).data;
  for (std::size_t i = 0; i < wo.size(); ++i) {
    const bool trainable =
        mask.out && (mask.out_cols.empty() || mask.out_cols[i % n]);
    if (trainable)
      g.d_out.data[i] += 2.0 * cfg.l2_weight * wo[i];
    else
      g.d_out.data[i] = 0.0;
  }
  return g;
}

namespace {

void adam_update_block(std::vector<double>& w, const std::vector<double>& grad,
                       std::vector<double>& m, std::vector<double>& v,
                       double lr, const TrainConfig& cfg, double bc1,
                       double bc2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.adam_beta1 * m[i] + (1 - cfg.adam_beta1) * g;
    v[i] = cfg.adam_beta2 * v[i] + (1 - cfg.adam_beta2) * g * g;
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    w[i] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
  }
}

}  // namespace

void adam_step(NetworkParams& params, TaskKind task, const Gradients& grads,
               AdamState& state, const TrainConfig& cfg, double learning_rate) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  adam_update_block(params.w_rec.data, grads.d_rec.data, state.m_rec.data,
                    state.v_rec.data, learning_rate, cfg, bc1, bc2);
  adam_update_block(params.w_in.data, grads.d_in.data, state.m_in.data,
                    state.v_in.data, learning_rate, cfg, bc1, bc2);
  auto it = params.readouts.find(task);
  if (it != params.readouts.end() && !grads.d_out.data.empty())
    adam_update_block(it->second.data, grads.d_out.data, state.m_out.data,
                      state.v_out.data, learning_rate, cfg, bc1, bc2);
}

TrainingDiverged::TrainingDiverged(int it, double l)
    : std::runtime_error("training diverged at iteration " +
                         std::to_string(it) + " (loss=" + std::to_string(l) + ")"),
      iteration(it),
      loss(l) {}

TrainLog train(NetworkParams& params, TaskKind objective, const GradMask& mask,
               const TrialTiming& timing, const TrainConfig& cfg,
               const NoiseConfig& noise, RngStream& rng) {
  cfg.validate();
  timing.validate();
  {
    const bool fresh = !params.has_readout(objective);
    auto init_rng = derive_stream(rng, "readout_init", 0);
    ensure_readout(params, objective, init_rng);
    if (fresh && !mask.out_cols.empty()) {
      auto& w = params.readouts.at(objective);
      for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < w.cols; ++c)
          if (!mask.out_cols[c]) w(r, c) = 0.0;
    }
  }
  AdamState state = AdamState::zeros(params.n, task_metadata(objective).n_out);
  TrainLog log;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.learning_rate *
                      (it >= cfg.lr_decay_after ? cfg.lr_decay_factor : 1.0);
    const auto batch_rng = derive_stream(rng, "batch", it);
    const auto batch = generate_batch(objective, timing, cfg.batch_trials, batch_rng);
    auto noise_rng = derive_stream(rng, "noise", it);
    const auto grads =
        bptt_gradients(params, objective, batch, mask, cfg, noise, noise_rng);
    if (!std::isfinite(grads.loss)) throw TrainingDiverged(it, grads.loss);
    adam_step(params, objective, grads, state, cfg, lr);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    log.entries.push_back({it, grads.loss, lr, ms});
  }
  return log;
}

TrainLog train_joint(NetworkParams& params, const std::vector<TaskKind>& objectives,
                     const GradMask& mask, const TrialTiming& timing,
                     const TrainConfig& cfg, const NoiseConfig& noise,
                     RngStream& rng) {
  cfg.validate();
  timing.validate();
  if (objectives.empty())
    throw std::invalid_argument("train_joint: no objectives");
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    auto init_rng = derive_stream(rng, "readout_init", k);
    ensure_readout(params, objectives[k], init_rng);
  }
  AdamState state = AdamState::zeros(params.n, 1);
  TrainLog log;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.learning_rate *
                      (it >= cfg.lr_decay_after ? cfg.lr_decay_factor : 1.0);
    Gradients sum;
    sum.d_rec = Matrix(params.n, params.n);
    sum.d_in = Matrix(params.n, kNumInputChannels);
    double loss = 0;
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      const auto batch_rng =
          derive_stream(rng, "batch", static_cast<std::uint64_t>(it) *
                                          objectives.size() + k);
      const auto batch =
          generate_batch(objectives[k], timing, cfg.batch_trials, batch_rng);
      auto noise_rng =
          derive_stream(rng, "noise", static_cast<std::uint64_t>(it) *
                                          objectives.size() + k);
      const auto g = bptt_gradients(params, objectives[k], batch, mask, cfg,
                                    noise, noise_rng);
      loss += g.loss;
      for (std::size_t i = 0; i < sum.d_rec.data.size(); ++i)
        sum.d_rec.data[i] += g.d_rec.data[i];
      for (std::size_t i = 0; i < sum.d_in.data.size(); ++i)
        sum.d_in.data[i] += g.d_in.data[i];
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(it, loss);
    sum.loss = loss;
    // Readouts are excluded from the joint phase; pass empty d_out.
    adam_step(params, objectives[0], sum, state, cfg, lr);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    log.entries.push_back({it, loss, lr, ms});
  }
  return log;
}

}  // namespace mtp
