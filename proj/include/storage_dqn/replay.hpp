#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "storage_dqn/environment.hpp"

namespace storage_dqn {

struct Experience {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
};

// Complete binary tree of priority sums over a power-of-two number of leaves.
// Parents are recomputed from their children on every write, so there is no
// accumulated drift and each internal node is exactly left + right.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return nodes_[leaves_ + leaf]; }
  double total() const { return nodes_[1]; }
  std::size_t capacity() const { return capacity_; }

  // Leaf whose cumulative range contains `mass`, skipping zero-weight leaves.
  std::size_t find(double mass) const;

  // True when every internal node equals the sum of its two children.
  bool consistent() const;

 private:
  std::size_t capacity_;
  std::size_t leaves_;
  std::vector<double> nodes_;  // 1-based heap layout; nodes_[0] unused
};

struct PerConfig {
  std::size_t capacity = 10240;
  double alpha = 0.6;           // prioritization exponent a
  double beta = 0.4;            // importance-sampling exponent b
  double priority_floor = 1e-3; // epsilon_p added to |td error|
  double initial_priority = 1.0;
  bool stratified = true;

  void check() const;
};

struct SampleBatch {
  std::vector<std::size_t> indices;
  std::vector<const Experience*> experiences;
  std::vector<double> is_weights;     // normalized so the batch maximum is 1
  std::vector<double> probabilities;  // P(i) for each draw
};

// Proportional prioritized replay: P(i) = p_i^a / sum_k p_k^a.
class PerBuffer {
 public:
  explicit PerBuffer(PerConfig config);

  // Stores with the largest priority seen so far; overwrites the oldest entry when full.
  void push(Experience exp);

  // Throws UsageError when fewer than batch_size entries are stored.
  SampleBatch sample(std::size_t batch_size, std::mt19937_64& rng) const;

  // p_i <- |td_i| + priority_floor.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors);
  // Direct assignment; value must be >= priority_floor.
  void set_priority(std::size_t index, double priority);

  void set_beta(double beta) { config_.beta = beta; }
  double beta() const { return config_.beta; }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return config_.capacity; }
  double priority(std::size_t index) const;
  double probability(std::size_t index) const;
  double max_priority() const { return max_priority_; }
  const Experience& at(std::size_t index) const;
  const SumTree& tree() const { return tree_; }
  const PerConfig& config() const { return config_; }

 private:
  void store_priority(std::size_t index, double priority);

  PerConfig config_;
  SumTree tree_;
  std::vector<Experience> entries_;
  std::vector<double> priorities_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  double max_priority_;
};

}  // namespace storage_dqn
