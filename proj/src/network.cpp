#include "storage_dqn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include <Eigen/Core>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

void LayerSpec::check() const {
  if (trunk_sizes.empty()) throw ConfigError("network trunk needs at least one hidden layer");
  for (int s : trunk_sizes) {
    if (s < 1) throw ConfigError("network layer sizes must be >= 1");
  }
  for (int s : stream_sizes) {
    if (s < 1) throw ConfigError("network layer sizes must be >= 1");
  }
}

bool NetworkParams::same_shape(const NetworkParams& other) const {
  return spec == other.spec && input_dim == other.input_dim && trunk == other.trunk &&
         value == other.value && advantage == other.advantage && values.size() == other.values.size();
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  std::fill(z.values.begin(), z.values.end(), 0.0);
  return z;
}

bool NetworkParams::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void add_layer(std::vector<DenseShape>& stack, int in, int out, std::size_t& cursor) {
  DenseShape d;
  d.in = in;
  d.out = out;
  d.weight_offset = cursor;
  cursor += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
  d.bias_offset = cursor;
  cursor += static_cast<std::size_t>(out);
  stack.push_back(d);
}

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const Matrix>;
using Weights = Eigen::Map<Matrix>;
using ConstBias = Eigen::Map<const Eigen::RowVectorXd>;
using Bias = Eigen::Map<Eigen::RowVectorXd>;

ConstWeights weights_of(const DenseShape& d, const double* params) {
  return ConstWeights(params + d.weight_offset, d.in, d.out);
}

// Activations per layer for a whole batch (one row per sample); index 0 is the layer input.
struct Activations {
  std::vector<Matrix> trunk;
  std::vector<Matrix> value;
  std::vector<Matrix> advantage;
};

// acts[0] holds the input on entry. Hidden layers apply ReLU; the last layer is
// linear unless relu_last.
void run_stack(const std::vector<DenseShape>& stack, const double* params, std::vector<Matrix>& acts,
               bool relu_last) {
  acts.resize(stack.size() + 1);
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto& d = stack[l];
    acts[l + 1].noalias() = acts[l] * weights_of(d, params);
    acts[l + 1].rowwise() += ConstBias(params + d.bias_offset, d.out);
    if (relu_last || l + 1 < stack.size()) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
}

// Backpropagates d_out (gradient w.r.t. the stack output) and returns the gradient
// w.r.t. the stack input.
Matrix back_stack(const std::vector<DenseShape>& stack, const double* params, const std::vector<Matrix>& acts,
                  Matrix d_out, bool relu_last, double* grad) {
  for (std::size_t l = stack.size(); l-- > 0;) {
    const auto& d = stack[l];
    if (relu_last || l + 1 < stack.size()) {
      d_out = (acts[l + 1].array() > 0.0).select(d_out, 0.0);
    }
    Weights(grad + d.weight_offset, d.in, d.out).noalias() += acts[l].transpose() * d_out;
    Bias(grad + d.bias_offset, d.out) += d_out.colwise().sum();
    Matrix d_in = d_out * weights_of(d, params).transpose();
    d_out = std::move(d_in);
  }
  return d_out;
}

void check_obs(const NetworkParams& p, std::span<const double> obs) {
  if (static_cast<int>(obs.size()) != p.input_dim) {
    throw ShapeError("observation length " + std::to_string(obs.size()) + " does not match network input " +
                     std::to_string(p.input_dim));
  }
}

// Runs the whole network on a batch; fills `a` and returns one output per row.
std::vector<DuelingOutput> forward_cached(const NetworkParams& p, std::span<const std::span<const double>> batch,
                                          Activations& a) {
  const auto rows = static_cast<Eigen::Index>(batch.size());
  a.trunk.resize(p.trunk.size() + 1);
  Matrix& x = a.trunk[0];
  x.resize(rows, p.input_dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto obs = batch[static_cast<std::size_t>(r)];
    check_obs(p, obs);
    for (int i = 0; i < p.input_dim; ++i) {
      const double v = obs[static_cast<std::size_t>(i)];
      x(r, i) = p.input_shift.empty() ? v : (v - p.input_shift[i]) * p.input_scale[i];
    }
  }
  const double* w = p.values.data();
  run_stack(p.trunk, w, a.trunk, true);
  a.value.resize(p.value.size() + 1);
  a.value[0] = a.trunk.back();
  run_stack(p.value, w, a.value, false);
  a.advantage.resize(p.advantage.size() + 1);
  a.advantage[0] = a.trunk.back();
  run_stack(p.advantage, w, a.advantage, false);

  std::vector<DuelingOutput> out(batch.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto& o = out[static_cast<std::size_t>(r)];
    o.value = a.value.back()(r, 0);
    for (int k = 0; k < kNumActions; ++k) o.advantage[k] = a.advantage.back()(r, k);
    o.q = dueling_aggregate(o.value, o.advantage);
  }
  return out;
}

void check_batch(std::span<const BatchItem> batch, std::span<const double> weights) {
  if (batch.empty()) throw DomainError("loss needs a nonempty batch");
  if (weights.size() != batch.size()) throw DomainError("importance weights must match the batch length");
  for (const auto& item : batch) {
    if (item.action < 0 || item.action >= kNumActions) throw DomainError("batch action out of range");
  }
}

std::vector<std::span<const double>> observations_of(std::span<const BatchItem> batch) {
  std::vector<std::span<const double>> obs;
  obs.reserve(batch.size());
  for (const auto& item : batch) obs.push_back(item.obs);
  return obs;
}

}  // namespace

NetworkParams init_network(const LayerSpec& spec, int input_dim, std::uint64_t seed) {
  spec.check();
  if (input_dim < 1) throw ConfigError("network input_dim must be >= 1");
  NetworkParams p;
  p.spec = spec;
  p.input_dim = input_dim;
  p.seed = seed;
  std::size_t cursor = 0;
  int width = input_dim;
  for (int s : spec.trunk_sizes) {
    add_layer(p.trunk, width, s, cursor);
    width = s;
  }
  const int trunk_out = width;
  auto build_stream = [&](std::vector<DenseShape>& stack, int outputs) {
    int w = trunk_out;
    for (int s : spec.stream_sizes) {
      add_layer(stack, w, s, cursor);
      w = s;
    }
    add_layer(stack, w, outputs, cursor);
  };
  build_stream(p.value, 1);
  build_stream(p.advantage, kNumActions);
  p.values.assign(cursor, 0.0);

  std::mt19937_64 rng(seed);
  auto fill = [&](const std::vector<DenseShape>& stack) {
    for (const auto& d : stack) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(d.in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const std::size_t n = static_cast<std::size_t>(d.in) * static_cast<std::size_t>(d.out);
      for (std::size_t i = 0; i < n; ++i) p.values[d.weight_offset + i] = dist(rng);
    }
  };
  fill(p.trunk);
  fill(p.value);
  fill(p.advantage);
  return p;
}

void set_input_scaling(NetworkParams& params, std::span<const double> lo, std::span<const double> hi) {
  const auto n = static_cast<std::size_t>(params.input_dim);
  if (lo.size() != n || hi.size() != n) throw ShapeError("input scaling bounds must match the input dimension");
  params.input_shift.assign(lo.begin(), lo.end());
  params.input_scale.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double range = hi[i] - lo[i];
    if (range > 0.0) params.input_scale[i] = 1.0 / range;
  }
}

QValues dueling_aggregate(double value, const QValues& advantage) {
  double mean = 0.0;
  for (double a : advantage) mean += a;
  mean /= kNumActions;
  QValues q{};
  for (int k = 0; k < kNumActions; ++k) q[k] = value + (advantage[k] - mean);
  return q;
}

DuelingOutput forward_detail(const NetworkParams& params, std::span<const double> obs) {
  thread_local Activations scratch;
  const std::span<const double> one[1] = {obs};
  return forward_cached(params, one, scratch).front();
}

QValues forward(const NetworkParams& params, std::span<const double> obs) { return forward_detail(params, obs).q; }

std::vector<QValues> forward_batch(const NetworkParams& params, std::span<const std::span<const double>> batch) {
  thread_local Activations scratch;
  std::vector<QValues> q;
  q.reserve(batch.size());
  for (const auto& o : forward_cached(params, batch, scratch)) q.push_back(o.q);
  return q;
}

double loss(const NetworkParams& params, std::span<const BatchItem> batch, std::span<const double> weights) {
  check_batch(batch, weights);
  const auto q = forward_batch(params, observations_of(batch));
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double diff = batch[i].target - q[i][batch[i].action];
    sum += weights[i] * diff * diff;
  }
  return sum / (2.0 * static_cast<double>(batch.size()));
}

LossGradient loss_and_gradient(const NetworkParams& params, std::span<const BatchItem> batch,
                               std::span<const double> weights) {
  check_batch(batch, weights);
  LossGradient out;
  out.gradient = params.zeros_like();
  const double n = static_cast<double>(batch.size());
  const auto rows = static_cast<Eigen::Index>(batch.size());

  Activations a;
  const auto fwd = forward_cached(params, observations_of(batch), a);

  // dL/dQ is nonzero only for the taken action; mean-centering spreads it over V
  // and every advantage output.
  Matrix d_value(rows, 1);
  Matrix d_adv(rows, kNumActions);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& item = batch[static_cast<std::size_t>(r)];
    const double q = fwd[static_cast<std::size_t>(r)].q[item.action];
    out.predicted.push_back(q);
    const double diff = q - item.target;
    const double w = weights[static_cast<std::size_t>(r)];
    sum += w * diff * diff;
    const double dq = w * diff / n;
    d_value(r, 0) = dq;
    for (int k = 0; k < kNumActions; ++k) d_adv(r, k) = (k == item.action ? dq : 0.0) - dq / kNumActions;
  }
  out.loss = sum / (2.0 * n);

  const double* w = params.values.data();
  double* g = out.gradient.values.data();
  Matrix d_trunk = back_stack(params.value, w, a.value, std::move(d_value), false, g);
  d_trunk += back_stack(params.advantage, w, a.advantage, std::move(d_adv), false, g);
  back_stack(params.trunk, w, a.trunk, std::move(d_trunk), true, g);
  return out;
}

NetworkParams backward(const NetworkParams& params, std::span<const BatchItem> batch,
                       std::span<const double> weights) {
  return loss_and_gradient(params, batch, weights).gradient;
}

NetworkParams apply_update(const NetworkParams& params, const NetworkParams& gradients, double learning_rate) {
  if (!params.same_shape(gradients)) throw ShapeError("gradient shape does not match parameters");
  NetworkParams out = params;
  apply_update_in_place(out, gradients.values, learning_rate);
  return out;
}

void apply_update_in_place(NetworkParams& params, std::span<const double> step, double learning_rate) {
  if (step.size() != params.values.size()) throw ShapeError("update shape does not match parameters");
  for (std::size_t i = 0; i < step.size(); ++i) params.values[i] -= learning_rate * step[i];
}

NetworkParams copy_params(const NetworkParams& src) { return src; }

namespace {

constexpr char kMagic[8] = {'S', 'D', 'Q', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(v >> (8 * b)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void ints(const std::vector<int>& xs) {
    u32(static_cast<std::uint32_t>(xs.size()));
    for (int x : xs) u32(static_cast<std::uint32_t>(x));
  }
  void doubles(const std::vector<double>& xs) {
    u64(xs.size());
    for (double x : xs) f64(x);
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : bytes(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * b);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::vector<int> ints() {
    const auto n = u32();
    if (n > 1024) throw ShapeError("checkpoint: implausible layer count");
    std::vector<int> xs(n);
    for (auto& x : xs) x = static_cast<int>(u32());
    return xs;
  }
  std::vector<double> doubles() {
    const auto n = u64();
    if (n > (bytes.size() - pos) / 8) throw ShapeError("checkpoint: truncated array");
    std::vector<double> xs(n);
    for (auto& x : xs) x = f64();
    return xs;
  }
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw ShapeError("checkpoint: truncated");
  }
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::vector<unsigned char> serialize(const NetworkParams& params) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kFormatVersion);
  w.u64(params.seed);
  w.u32(static_cast<std::uint32_t>(params.input_dim));
  w.ints(params.spec.trunk_sizes);
  w.ints(params.spec.stream_sizes);
  w.doubles(params.values);
  w.doubles(params.input_shift);
  w.doubles(params.input_scale);
  return std::move(w.bytes);
}

NetworkParams deserialize(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw ShapeError("not a checkpoint (bad magic)");
  r.pos = sizeof kMagic;
  const auto version = r.u32();
  if (version != kFormatVersion) {
    throw ShapeError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto seed = r.u64();
  const auto input_dim = static_cast<int>(r.u32());
  LayerSpec spec;
  spec.trunk_sizes = r.ints();
  spec.stream_sizes = r.ints();
  NetworkParams p = init_network(spec, input_dim, seed);
  auto values = r.doubles();
  if (values.size() != p.values.size()) throw ShapeError("checkpoint parameter count does not match its layer spec");
  p.values = std::move(values);
  p.input_shift = r.doubles();
  p.input_scale = r.doubles();
  if (p.input_shift.size() != p.input_scale.size() ||
      (!p.input_shift.empty() && p.input_shift.size() != static_cast<std::size_t>(input_dim))) {
    throw ShapeError("checkpoint input scaling does not match input dimension");
  }
  if (r.pos != bytes.size()) throw ShapeError("checkpoint: trailing bytes");
  return p;
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  const auto bytes = serialize(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace storage_dqn
