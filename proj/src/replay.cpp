#include "storage_dqn/replay.hpp"

#include <algorithm>
#include <cmath>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), leaves_(1) {
  if (capacity == 0) throw ConfigError("sum tree capacity must be >= 1");
  while (leaves_ < capacity) leaves_ <<= 1;
  nodes_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= capacity_) throw DomainError("sum tree leaf out of range");
  std::size_t node = leaves_ + leaf;
  nodes_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t node = 1;
  while (node < leaves_) {
    const double left = nodes_[2 * node];
    const double right = nodes_[2 * node + 1];
    if (mass < left || right <= 0.0) {
      node = 2 * node;
    } else {
      mass -= left;
      node = 2 * node + 1;
    }
  }
  return std::min(node - leaves_, capacity_ - 1);
}

bool SumTree::consistent() const {
  for (std::size_t node = 1; node < leaves_; ++node) {
    if (nodes_[node] != nodes_[2 * node] + nodes_[2 * node + 1]) return false;
  }
  return true;
}

void PerConfig::check() const {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  if (!(alpha >= 0.0)) throw ConfigError("replay alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("replay beta must be >= 0");
  if (!(priority_floor > 0.0)) throw ConfigError("replay priority_floor must be > 0");
  if (!(initial_priority >= priority_floor)) throw ConfigError("replay initial priority must be >= priority_floor");
}

PerBuffer::PerBuffer(PerConfig config)
    : config_(config), tree_(config.capacity), max_priority_(config.initial_priority) {
  config_.check();
  entries_.resize(config_.capacity);
  priorities_.assign(config_.capacity, 0.0);
}

void PerBuffer::store_priority(std::size_t index, double priority) {
  priorities_[index] = priority;
  tree_.set(index, config_.alpha == 0.0 ? 1.0 : std::pow(priority, config_.alpha));
  max_priority_ = std::max(max_priority_, priority);
}

void PerBuffer::push(Experience exp) {
  if (exp.action < 0 || exp.action >= kNumActions) throw DomainError("experience action out of range");
  entries_[next_] = std::move(exp);
  store_priority(next_, max_priority_);
  next_ = (next_ + 1) % config_.capacity;
  size_ = std::min(size_ + 1, config_.capacity);
}

SampleBatch PerBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (size_ < batch_size) {
    throw UsageError("replay holds " + std::to_string(size_) + " transitions, batch needs " +
                     std::to_string(batch_size));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = tree_.total();
  SampleBatch batch;
  batch.indices.reserve(batch_size);
  const double segment = total / static_cast<double>(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) {
    const double mass = config_.stratified ? (static_cast<double>(j) + unit(rng)) * segment : unit(rng) * total;
    std::size_t idx = tree_.find(mass);
    // guards a rounding overshoot past the last stored entry
    if (idx >= size_) idx = size_ - 1;
    batch.indices.push_back(idx);
  }

  const double n = static_cast<double>(size_);
  double max_w = 0.0;
  for (std::size_t idx : batch.indices) {
    const double p = tree_.get(idx) / total;
    batch.probabilities.push_back(p);
    const double w = config_.beta == 0.0 ? 1.0 : std::pow(n * p, -config_.beta);
    batch.is_weights.push_back(w);
    max_w = std::max(max_w, w);
    batch.experiences.push_back(&entries_[idx]);
  }
  for (double& w : batch.is_weights) w /= max_w;
  return batch;
}

void PerBuffer::update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) throw DomainError("indices and td_errors differ in length");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size_) throw DomainError("replay index out of range: " + std::to_string(indices[k]));
    store_priority(indices[k], std::abs(td_errors[k]) + config_.priority_floor);
  }
}

void PerBuffer::set_priority(std::size_t index, double priority) {
  if (index >= size_) throw DomainError("replay index out of range: " + std::to_string(index));
  if (!(priority >= config_.priority_floor)) throw DomainError("priority below the floor");
  store_priority(index, priority);
}

double PerBuffer::priority(std::size_t index) const {
  if (index >= size_) throw DomainError("replay index out of range: " + std::to_string(index));
  return priorities_[index];
}

double PerBuffer::probability(std::size_t index) const {
  if (index >= size_) throw DomainError("replay index out of range: " + std::to_string(index));
  return tree_.get(index) / tree_.total();
}

const Experience& PerBuffer::at(std::size_t index) const {
  if (index >= size_) throw DomainError("replay index out of range: " + std::to_string(index));
  return entries_[index];
}

}  // namespace storage_dqn
