#include "mtp/network.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace mtp {

int ModulePartition::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), 0);
}

std::pair<int, int> ModulePartition::range(int m) const {
  if (m < 0 || m >= num_modules())
    throw std::invalid_argument("partition: bad module index");
  int begin = 0;
  for (int i = 0; i < m; ++i) begin += sizes[i];
  return {begin, begin + sizes[m]};
}

int ModulePartition::module_of(int unit) const {
  int begin = 0;
  for (int m = 0; m < num_modules(); ++m) {
    if (unit < begin + sizes[m]) return m;
    begin += sizes[m];
  }
  throw std::invalid_argument("partition: unit out of range");
}

const char* connectivity_name(Connectivity c) {
  return c == Connectivity::Disconnected ? "disconnected" : "connected";
}

Connectivity connectivity_from_name(const std::string& name) {
  if (name == "disconnected") return Connectivity::Disconnected;
  if (name == "connected") return Connectivity::Connected;
  throw std::invalid_argument("unknown connectivity: " + name);
}

NetworkParams init_params(int n, const ModulePartition& partition,
                          Connectivity connectivity, double g,
                          RngStream& rng) {
  if (partition.total() != n)
    throw std::invalid_argument("init_params: partition does not sum to n");
  if (g <= 0) throw std::invalid_argument("init_params: g must be > 0");

  NetworkParams p;
  p.n = n;
  p.partition = partition;
  p.connectivity = connectivity;
  p.w_rec = gaussian_matrix(n, n, g / std::sqrt(static_cast<double>(n)), rng);
  p.w_in = gaussian_matrix(n, kNumInputChannels,
                           1.0 / std::sqrt(static_cast<double>(kNumInputChannels)),
                           rng);

  if (connectivity == Connectivity::Disconnected) {
    for (int i = 0; i < n; ++i) {
      const int mi = partition.module_of(i);
      for (int j = 0; j < n; ++j)
        if (partition.module_of(j) != mi) p.w_rec(i, j) = 0.0;
      for (int c = 0; c < kNumInputChannels; ++c)
        if (c != mi % kNumInputChannels || mi >= kNumInputChannels)
          p.w_in(i, c) = 0.0;
    }
  }
  return p;
}

void ensure_readout(NetworkParams& params, TaskKind task, RngStream& rng) {
  if (params.has_readout(task)) return;
  const int n_out = task_metadata(task).n_out;
  params.readouts[task] = gaussian_matrix(
      n_out, params.n, 1.0 / std::sqrt(static_cast<double>(n_out)), rng);
}

ForwardResult forward(const NetworkParams& params, TaskKind task,
                      const Matrix& inputs, const NoiseConfig& noise,
                      RngStream& rng, const ForwardOverlay& overlay) {
  const auto meta = task_metadata(task);
  if (inputs.cols != kNumInputChannels)
    throw std::invalid_argument("forward: inputs must have 3 channels");
  const auto it = params.readouts.find(task);
  if (it == params.readouts.end())
    throw std::invalid_argument(std::string("forward: no readout for task ") +
                                task_name(task));
  const Matrix& w_out = it->second;
  if (w_out.cols != params.n || w_out.rows != meta.n_out)
    throw std::invalid_argument("forward: readout shape mismatch");

  const int T = inputs.rows;
  const int n = params.n;
  ForwardResult res{Matrix(T, n), Matrix(T, meta.n_out)};

  const double in_sigma =
      (noise.enabled ? noise.input_noise_sigma : 0.0) +
      0.0;  // perturbation input noise is added separately below
  const double st_sigma = noise.enabled ? noise.state_noise_sigma : 0.0;
  const double extra_in = overlay.extra_input_noise_sigma;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x(kNumInputChannels);
  auto w_rec = params.w_rec.map();
  auto w_in = params.w_in.map();
  auto w_o = w_out.map();

  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < kNumInputChannels; ++c) {
      x[c] = inputs(t, c);
      if (in_sigma > 0) x[c] += rng.gaussian(0.0, in_sigma);
      if (extra_in > 0) x[c] += rng.gaussian(0.0, extra_in);
    }
    Eigen::VectorXd a = w_rec * h + w_in * x;
    if (st_sigma > 0)
      for (int i = 0; i < n; ++i) a[i] += rng.gaussian(0.0, st_sigma);
    h = a.array().tanh();
    if (overlay.silenced)
      for (int i = 0; i < n; ++i)
        if ((*overlay.silenced)[i]) h[i] = 0.0;
    for (int i = 0; i < n; ++i) res.states(t, i) = h[i];
    Eigen::VectorXd y = w_o * h;
    for (int k = 0; k < meta.n_out; ++k) res.outputs(t, k) = y[k];
  }
  return res;
}

namespace {

void append_bytes(std::string& buf, const Matrix& m) {
  const char* p = reinterpret_cast<const char*>(m.data.data());
  buf.append(p, m.data.size() * sizeof(double));
}

}  // namespace

std::uint64_t weights_hash(const NetworkParams& params) {
  std::string buf;
  append_bytes(buf, params.w_rec);
  append_bytes(buf, params.w_in);
  for (const auto& [task, w] : params.readouts) append_bytes(buf, w);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : buf) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_network(const NetworkParams& params, const std::string& dir,
                  const NetworkMeta& meta) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json j;
  j["format_version"] = 1;
  j["n"] = params.n;
  j["partition"] = params.partition.sizes;
  j["connectivity"] = connectivity_name(params.connectivity);
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& [task, w] : params.readouts)
    tasks.push_back({{"task", task_name(task)}, {"n_out", w.rows}});
  j["tasks"] = tasks;
  j["master_seed"] = meta.master_seed;
  j["config_hash"] = meta.config_hash;

  std::ofstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("save_network: cannot write meta.json");
  mf << j.dump(2) << "\n";

  std::ofstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!wf) throw std::runtime_error("save_network: cannot write weights.bin");
  auto write_mat = [&wf](const Matrix& m) {
    wf.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  };
  write_mat(params.w_rec);
  write_mat(params.w_in);
  for (const auto& [task, w] : params.readouts) write_mat(w);
}

std::pair<NetworkParams, NetworkMeta> load_network(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("load_network: missing meta.json in " + dir);
  nlohmann::json j;
  mf >> j;
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("load_network: unsupported format_version");

  NetworkParams p;
  p.n = j.at("n").get<int>();
  p.partition.sizes = j.at("partition").get<std::vector<int>>();
  p.connectivity = connectivity_from_name(j.at("connectivity").get<std::string>());
  if (p.partition.total() != p.n)
    throw std::runtime_error("load_network: partition does not sum to n");

  NetworkMeta meta;
  meta.master_seed = j.at("master_seed").get<std::uint64_t>();
  meta.config_hash = j.at("config_hash").get<std::string>();

  std::ifstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!wf) throw std::runtime_error("load_network: missing weights.bin in " + dir);
  auto read_mat = [&wf](int r, int c) {
    Matrix m(r, c);
    wf.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    return m;
  };
  p.w_rec = read_mat(p.n, p.n);
  p.w_in = read_mat(p.n, kNumInputChannels);
  for (const auto& t : j.at("tasks")) {
    const TaskKind task = task_from_name(t.at("task").get<std::string>());
    const int n_out = t.at("n_out").get<int>();
    if (n_out != task_metadata(task).n_out)
      throw std::runtime_error("load_network: n_out mismatch for task");
    p.readouts[task] = read_mat(n_out, p.n);
  }
  if (!wf)
    throw std::runtime_error("load_network: weights.bin truncated");
  wf.peek();
  if (!wf.eof())
    throw std::runtime_error("load_network: weights.bin has trailing bytes");
  return {std::move(p), std::move(meta)};
}

}  // namespace mtp
