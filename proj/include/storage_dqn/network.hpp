#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "storage_dqn/environment.hpp"

namespace storage_dqn {

// Hidden-layer widths of the dueling MLP. Hidden layers use ReLU, outputs are linear.
struct LayerSpec {
  std::vector<int> trunk_sizes{64, 64};
  std::vector<int> stream_sizes{32};

  void check() const;
  bool operator==(const LayerSpec&) const = default;
};

// Fully connected layer laid out inside NetworkParams::values.
// Weights are a row-major [in][out] matrix, followed by `out` biases.
struct DenseShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  bool operator==(const DenseShape&) const = default;
};

// Shared trunk, value stream ending in V(s), advantage stream ending in A(s, .).
// All trainable numbers live in one contiguous array so that updates, copies and
// gradients are plain vector operations.
struct NetworkParams {
  LayerSpec spec;
  int input_dim = 0;
  std::uint64_t seed = 0;
  std::vector<DenseShape> trunk;
  std::vector<DenseShape> value;
  std::vector<DenseShape> advantage;
  std::vector<double> values;

  // Fixed input transform x' = (x - input_shift) * input_scale; not trained.
  std::vector<double> input_shift;
  std::vector<double> input_scale;

  std::size_t size() const { return values.size(); }
  bool same_shape(const NetworkParams& other) const;
  // Same layout, all trainable values zero.
  NetworkParams zeros_like() const;
  bool all_finite() const;
};

using QValues = std::array<double, kNumActions>;

struct DuelingOutput {
  double value = 0.0;
  QValues advantage{};
  QValues q{};
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, identity input transform.
NetworkParams init_network(const LayerSpec& spec, int input_dim, std::uint64_t seed);

// Min-max input scaling to [0, 1] from per-field bounds. Degenerate ranges are only shifted.
void set_input_scaling(NetworkParams& params, std::span<const double> lo, std::span<const double> hi);

// Q = V + (A - mean(A)).
QValues dueling_aggregate(double value, const QValues& advantage);

DuelingOutput forward_detail(const NetworkParams& params, std::span<const double> obs);
QValues forward(const NetworkParams& params, std::span<const double> obs);
std::vector<QValues> forward_batch(const NetworkParams& params, std::span<const std::span<const double>> batch);

struct BatchItem {
  std::span<const double> obs;
  int action = 0;
  double target = 0.0;
};

// (1/2n) * sum_i w_i (target_i - Q(s_i, a_i))^2
double loss(const NetworkParams& params, std::span<const BatchItem> batch, std::span<const double> weights);

struct LossGradient {
  NetworkParams gradient;
  double loss = 0.0;
  // Q(s_i, a_i) before the update, one per batch item.
  std::vector<double> predicted;
};

// Exact gradient of loss() with respect to params.values.
LossGradient loss_and_gradient(const NetworkParams& params, std::span<const BatchItem> batch,
                               std::span<const double> weights);
NetworkParams backward(const NetworkParams& params, std::span<const BatchItem> batch,
                       std::span<const double> weights);

// params - learning_rate * gradients
NetworkParams apply_update(const NetworkParams& params, const NetworkParams& gradients, double learning_rate);
void apply_update_in_place(NetworkParams& params, std::span<const double> step, double learning_rate);

NetworkParams copy_params(const NetworkParams& src);

// Versioned little-endian binary container; round-trips bit-exactly.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);
std::vector<unsigned char> serialize(const NetworkParams& params);
NetworkParams deserialize(std::span<const unsigned char> bytes);

}  // namespace storage_dqn
