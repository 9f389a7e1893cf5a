#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "storage_dqn/environment.hpp"
#include "storage_dqn/network.hpp"
#include "storage_dqn/replay.hpp"

namespace storage_dqn {

struct AgentConfig {
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 10240;
  double discount = 0.96;
  double learning_rate = 0.00025;
  double epsilon_initial = 1.0;
  double epsilon_final = 0.1;
  // 0 selects 80% of the total number of training steps.
  std::size_t epsilon_decay_steps = 0;
  std::size_t target_update_every = 5;  // episodes (days)
  std::size_t epochs = 500;
  std::size_t warmup_transitions = 1024;
  std::size_t checkpoint_every = 10;  // epochs
  // Days per epoch when the training profile is longer; the window rolls over the data.
  std::size_t history_days = 15;
  std::size_t train_every = 1;  // environment steps per gradient step
  bool double_dqn = true;
  double momentum = 0.0;
  double reward_scale = 1.0;  // applied to rewards stored in replay; 0 picks auto_reward_scale
  double grad_clip = 0.0;     // global L2 norm; 0 disables
  bool normalize_inputs = false;
  std::uint64_t seed = 1;
  LayerSpec layers;

  double per_alpha = 0.6;
  double per_beta_initial = 0.4;
  double per_beta_final = 1.0;
  bool per_anneal_beta = true;
  double per_priority_floor = 1e-3;
  bool per_stratified = true;

  void check() const;
};

// Linear decay from epsilon_initial to epsilon_final over epsilon_decay_steps.
double epsilon_at(const AgentConfig& config, std::size_t global_step);

// Lowest index among the maximal entries.
int greedy_action(const QValues& q);

// Epsilon-greedy: uniform random action with probability epsilon, else argmax Q.
Action select_action(const NetworkParams& params, std::span<const double> obs, double epsilon,
                     std::mt19937_64& rng);

// r if done; otherwise r + gamma * Q_target(s', argmax_a Q_online(s', a)) (double) or
// r + gamma * max_a Q_target(s', a) (single).
double td_target(const NetworkParams& target, const NetworkParams& online, const Experience& exp, double discount,
                 bool double_dqn = true);

// 1 / (largest hourly energy cost), so stored rewards mostly fall in [-1, 0].
double auto_reward_scale(const EnvConfig& env_config);

struct TrainRecord {
  std::size_t epoch = 0;
  double total_reward = 0.0;
  double cost = 0.0;
  double savings_pct = 0.0;
  double mean_loss = 0.0;
  double epsilon = 0.0;
  std::size_t gradient_steps = 0;
};

struct Checkpoint {
  std::size_t epoch = 0;
  NetworkParams params;
};

// Online/target networks, replay, optimizer state, and the single seeded generator.
class DqnAgent {
 public:
  DqnAgent(const AgentConfig& config, std::size_t observation_size, std::optional<NetworkParams> initial = {});

  Action act(std::span<const double> obs, double epsilon);
  void remember(Experience exp);

  // One PER-weighted gradient step. Returns nullopt (and counts a skip) while the
  // replay holds fewer than max(batch_size, warmup_transitions) transitions.
  std::optional<double> train_step();

  void sync_target() { target_ = online_; }
  void set_beta(double beta) { buffer_.set_beta(beta); }

  const NetworkParams& online() const { return online_; }
  const NetworkParams& target() const { return target_; }
  NetworkParams& mutable_online() { return online_; }
  const PerBuffer& buffer() const { return buffer_; }
  std::size_t skipped_steps() const { return skipped_; }
  std::size_t gradient_steps() const { return updates_; }
  // Indices and |td| + floor of the last gradient step, for inspection.
  const std::vector<std::size_t>& last_indices() const { return last_indices_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  AgentConfig config_;
  NetworkParams online_;
  NetworkParams target_;
  PerBuffer buffer_;
  std::vector<double> velocity_;
  std::mt19937_64 rng_;
  std::size_t skipped_ = 0;
  std::size_t updates_ = 0;
  std::vector<std::size_t> last_indices_;
};

struct TrainResult {
  NetworkParams params;
  std::vector<Checkpoint> checkpoints;  // epoch 0, every checkpoint_every epochs, and the final epoch
  std::vector<TrainRecord> records;
};

// Runs `epochs` passes of one episode per training day. Fully determined by the
// config (including seed) and the data.
TrainResult train(const EnvConfig& env_config, const AgentConfig& agent_config);

// Continues training from base_params in a new environment. Throws ShapeError when
// the observation length differs from the network input.
TrainResult fine_tune(const NetworkParams& base_params, const EnvConfig& env_config,
                      const AgentConfig& agent_config);

// Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a')); terminal
// transitions pass next_state = nullopt.
class QTable {
 public:
  QTable(std::size_t states, std::size_t actions, double initial = 0.0);
  double& at(std::size_t s, std::size_t a);
  double at(std::size_t s, std::size_t a) const;
  double max_value(std::size_t s) const;
  std::size_t greedy(std::size_t s) const;
  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<double> q_;
};

void tabular_q_update(QTable& table, std::size_t state, std::size_t action, double reward,
                      std::optional<std::size_t> next_state, double alpha, double discount);

// Discretizes the environment state as (hour, SoC level) for the tabular learner.
struct TabularEncoder {
  std::size_t hours = kHoursPerDay;
  std::size_t soc_levels = 2;

  std::size_t states() const { return hours * soc_levels; }
  std::size_t encode(int hour, double energy, const BatteryConfig& battery) const;
};

struct TabularResult {
  QTable table;
  std::vector<Action> greedy_actions;  // greedy rollout from reset
  double greedy_cost = 0.0;
};

// Q-learning with uniformly random behavior over the first `hours` hours of one load
// day. Each update is one environment transition.
TabularResult train_tabular(std::span<const double> load, const TariffSchedule& tariff,
                            const BatteryConfig& battery, const TabularEncoder& encoder, std::size_t updates,
                            double alpha, double discount, std::uint64_t seed);

}  // namespace storage_dqn
