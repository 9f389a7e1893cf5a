#include "storage_dqn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "storage_dqn/errors.hpp"
#include "storage_dqn/oracle.hpp"

namespace storage_dqn {

void AgentConfig::check() const {
  if (batch_size == 0) throw ConfigError("agent.batch_size must be >= 1");
  if (replay_capacity < batch_size) throw ConfigError("agent.replay_capacity must be >= batch_size");
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("agent.discount must lie in (0, 1)");
  if (!(learning_rate >= 0.0)) throw ConfigError("agent.learning_rate must be >= 0");
  if (!(epsilon_final >= 0.0 && epsilon_final <= epsilon_initial && epsilon_initial <= 1.0)) {
    throw ConfigError("agent epsilons must satisfy 0 <= final <= initial <= 1");
  }
  if (target_update_every == 0) throw ConfigError("agent.target_update_every must be >= 1");
  if (checkpoint_every == 0) throw ConfigError("agent.checkpoint_every must be >= 1");
  if (history_days == 0) throw ConfigError("agent.history_days must be >= 1");
  if (train_every == 0) throw ConfigError("agent.train_every must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("agent.momentum must lie in [0, 1)");
  if (!(reward_scale >= 0.0)) throw ConfigError("agent.reward_scale must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("agent.grad_clip must be >= 0");
  layers.check();
}

double epsilon_at(const AgentConfig& config, std::size_t global_step) {
  if (config.epsilon_decay_steps == 0 || global_step >= config.epsilon_decay_steps) return config.epsilon_final;
  const double frac = static_cast<double>(global_step) / static_cast<double>(config.epsilon_decay_steps);
  return config.epsilon_initial + frac * (config.epsilon_final - config.epsilon_initial);
}

int greedy_action(const QValues& q) {
  int best = 0;
  for (int k = 1; k < kNumActions; ++k) {
    if (q[k] > q[best]) best = k;
  }
  return best;
}

Action select_action(const NetworkParams& params, std::span<const double> obs, double epsilon,
                     std::mt19937_64& rng) {
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, kNumActions - 1);
      return static_cast<Action>(pick(rng));
    }
  }
  return static_cast<Action>(greedy_action(forward(params, obs)));
}

double td_target(const NetworkParams& target, const NetworkParams& online, const Experience& exp, double discount,
                 bool double_dqn) {
  if (exp.done) return exp.reward;
  const QValues q_target = forward(target, exp.next_obs);
  if (double_dqn) {
    const int best = greedy_action(forward(online, exp.next_obs));
    return exp.reward + discount * q_target[best];
  }
  return exp.reward + discount * *std::max_element(q_target.begin(), q_target.end());
}

namespace {

PerConfig per_config(const AgentConfig& c) {
  PerConfig p;
  p.capacity = c.replay_capacity;
  p.alpha = c.per_alpha;
  p.beta = c.per_beta_initial;
  p.priority_floor = c.per_priority_floor;
  p.stratified = c.per_stratified;
  return p;
}

}  // namespace

DqnAgent::DqnAgent(const AgentConfig& config, std::size_t observation_size, std::optional<NetworkParams> initial)
    : config_(config), buffer_(per_config(config)), rng_(config.seed) {
  config_.check();
  if (initial) {
    if (initial->input_dim != static_cast<int>(observation_size)) {
      throw ShapeError("network expects observations of length " + std::to_string(initial->input_dim) +
                       ", environment produces " + std::to_string(observation_size));
    }
    online_ = std::move(*initial);
  } else {
    online_ = init_network(config_.layers, static_cast<int>(observation_size), config_.seed);
  }
  target_ = online_;
  velocity_.assign(online_.size(), 0.0);
}

Action DqnAgent::act(std::span<const double> obs, double epsilon) { return select_action(online_, obs, epsilon, rng_); }

void DqnAgent::remember(Experience exp) {
  exp.reward *= config_.reward_scale;
  buffer_.push(std::move(exp));
}

std::optional<double> DqnAgent::train_step() {
  if (buffer_.size() < std::max(config_.batch_size, config_.warmup_transitions)) {
    ++skipped_;
    return std::nullopt;
  }
  const auto batch = buffer_.sample(config_.batch_size, rng_);
  // batched form of td_target()
  std::vector<std::span<const double>> next;
  next.reserve(batch.experiences.size());
  for (const Experience* e : batch.experiences) next.push_back(e->next_obs);
  const auto q_target = forward_batch(target_, next);
  std::vector<QValues> q_online;
  if (config_.double_dqn) q_online = forward_batch(online_, next);

  std::vector<BatchItem> items;
  items.reserve(batch.indices.size());
  for (std::size_t i = 0; i < batch.experiences.size(); ++i) {
    const Experience* e = batch.experiences[i];
    double y = e->reward;
    if (!e->done) {
      const auto& qt = q_target[i];
      y += config_.discount * (config_.double_dqn ? qt[greedy_action(q_online[i])]
                                                  : *std::max_element(qt.begin(), qt.end()));
    }
    items.push_back({e->obs, e->action, y});
  }
  auto lg = loss_and_gradient(online_, items, batch.is_weights);

  auto& g = lg.gradient.values;
  if (config_.grad_clip > 0.0) {
    const double norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    if (norm > config_.grad_clip) {
      const double s = config_.grad_clip / norm;
      for (double& x : g) x *= s;
    }
  }
  if (config_.momentum > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) velocity_[i] = config_.momentum * velocity_[i] + g[i];
    apply_update_in_place(online_, velocity_, config_.learning_rate);
  } else {
    apply_update_in_place(online_, g, config_.learning_rate);
  }

  std::vector<double> td(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) td[i] = items[i].target - lg.predicted[i];
  buffer_.update_priorities(batch.indices, td);
  last_indices_ = batch.indices;
  ++updates_;
  return lg.loss;
}

double auto_reward_scale(const EnvConfig& env_config) {
  const double worst_grid = env_config.load->max_load() + env_config.battery.max_charge_w;
  const double worst_cost = env_config.tariff.max_price() * worst_grid / 1000.0;
  return worst_cost > 0.0 ? 1.0 / worst_cost : 1.0;
}

namespace {

TrainResult run_training(const EnvConfig& env_config, const AgentConfig& agent_config,
                         std::optional<NetworkParams> initial) {
  agent_config.check();
  Environment env(env_config);
  const std::size_t days = env.day_count();
  const std::size_t window = std::min(agent_config.history_days, days);
  const std::size_t total_steps = agent_config.epochs * window * kHoursPerDay;

  AgentConfig cfg = agent_config;
  if (cfg.reward_scale == 0.0) cfg.reward_scale = auto_reward_scale(env_config);
  if (cfg.epsilon_decay_steps == 0) {
    cfg.epsilon_decay_steps = std::max<std::size_t>(1, static_cast<std::size_t>(0.8 * static_cast<double>(total_steps)));
  }
  if (!initial && cfg.normalize_inputs) {
    NetworkParams p = init_network(cfg.layers, static_cast<int>(env.observation_size()), cfg.seed);
    const auto [lo, hi] = env_config.observation_bounds();
    set_input_scaling(p, lo, hi);
    initial = std::move(p);
  }
  DqnAgent agent(cfg, env.observation_size(), std::move(initial));

  TrainResult result;
  result.checkpoints.push_back({0, agent.online()});
  std::size_t step = 0;
  std::size_t episodes = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    TrainRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    double baseline = 0.0;
    const std::size_t first = ((epoch - 1) * window) % days;
    for (std::size_t w = 0; w < window; ++w) {
      const std::size_t day = (first + w) % days;
      Observation obs = env.reset(day);
      while (!env.done()) {
        const bool warming = agent.buffer().size() < cfg.warmup_transitions;
        const double eps = warming ? 1.0 : epsilon_at(cfg, step);
        const Action a = agent.act(obs, eps);
        auto out = env.step(a);
        rec.total_reward += out.reward;
        agent.remember({std::move(obs), static_cast<int>(a), out.reward, out.next_observation, out.done});
        obs = std::move(out.next_observation);
        ++step;
        if (cfg.per_anneal_beta) {
          const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
          agent.set_beta(cfg.per_beta_initial + frac * (cfg.per_beta_final - cfg.per_beta_initial));
        }
        if (step % cfg.train_every == 0) {
          if (auto l = agent.train_step()) {
            loss_sum += *l;
            ++rec.gradient_steps;
          }
        }
      }
      rec.cost += env.episode_cost();
      baseline += baseline_cost(env_config.load->day(day), env_config.tariff, env_config.dr);
      ++episodes;
      if (episodes % cfg.target_update_every == 0) agent.sync_target();
    }
    rec.savings_pct = baseline > 0.0 ? cost_saving(rec.cost, baseline) : 0.0;
    rec.mean_loss = rec.gradient_steps > 0 ? loss_sum / static_cast<double>(rec.gradient_steps) : 0.0;
    rec.epsilon = epsilon_at(cfg, step);
    result.records.push_back(rec);
    if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) result.checkpoints.push_back({epoch, agent.online()});
  }
  result.params = agent.online();
  return result;
}

}  // namespace

TrainResult train(const EnvConfig& env_config, const AgentConfig& agent_config) {
  return run_training(env_config, agent_config, std::nullopt);
}

TrainResult fine_tune(const NetworkParams& base_params, const EnvConfig& env_config,
                      const AgentConfig& agent_config) {
  if (base_params.input_dim != static_cast<int>(env_config.observation_size())) {
    throw ShapeError("base network expects observations of length " + std::to_string(base_params.input_dim) +
                     ", new environment produces " + std::to_string(env_config.observation_size()));
  }
  if (agent_config.epochs == 0) {
    TrainResult r;
    r.params = base_params;
    r.checkpoints.push_back({0, base_params});
    return r;
  }
  return run_training(env_config, agent_config, base_params);
}

QTable::QTable(std::size_t states, std::size_t actions, double initial)
    : states_(states), actions_(actions), q_(states * actions, initial) {}

double& QTable::at(std::size_t s, std::size_t a) {
  if (s >= states_ || a >= actions_) throw DomainError("q-table index out of range");
  return q_[s * actions_ + a];
}

double QTable::at(std::size_t s, std::size_t a) const {
  if (s >= states_ || a >= actions_) throw DomainError("q-table index out of range");
  return q_[s * actions_ + a];
}

double QTable::max_value(std::size_t s) const {
  return *std::max_element(q_.begin() + static_cast<std::ptrdiff_t>(s * actions_),
                           q_.begin() + static_cast<std::ptrdiff_t>((s + 1) * actions_));
}

std::size_t QTable::greedy(std::size_t s) const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < actions_; ++a) {
    if (at(s, a) > at(s, best)) best = a;
  }
  return best;
}

void tabular_q_update(QTable& table, std::size_t state, std::size_t action, double reward,
                      std::optional<std::size_t> next_state, double alpha, double discount) {
  const double bootstrap = next_state ? discount * table.max_value(*next_state) : 0.0;
  double& q = table.at(state, action);
  q = (1.0 - alpha) * q + alpha * (reward + bootstrap);
}

std::size_t TabularEncoder::encode(int hour, double energy, const BatteryConfig& battery) const {
  std::size_t level = 0;
  const double span = battery.ceiling_wh() - battery.floor_wh();
  if (soc_levels > 1 && span > 0.0) {
    const double frac = std::clamp((energy - battery.floor_wh()) / span, 0.0, 1.0);
    level = static_cast<std::size_t>(std::lround(frac * static_cast<double>(soc_levels - 1)));
  }
  return static_cast<std::size_t>(hour) * soc_levels + level;
}

TabularResult train_tabular(std::span<const double> load, const TariffSchedule& tariff,
                            const BatteryConfig& battery, const TabularEncoder& encoder, std::size_t updates,
                            double alpha, double discount, std::uint64_t seed) {
  const std::size_t hours = std::min(encoder.hours, load.size());
  const DemandResponseConfig no_dr;
  TabularResult result{QTable(encoder.states(), kNumActions), {}, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, kNumActions - 1);

  double energy = battery.initial_wh();
  std::size_t t = 0;
  for (std::size_t u = 0; u < updates; ++u) {
    const std::size_t s = encoder.encode(static_cast<int>(t), energy, battery);
    const auto a = static_cast<Action>(pick(rng));
    const auto h = simulate_hour(battery, tariff, no_dr, static_cast<int>(t), energy, 0.0, a, load[t]);
    const bool terminal = t + 1 == hours;
    std::optional<std::size_t> next;
    if (!terminal) next = encoder.encode(static_cast<int>(t + 1), h.battery.new_energy, battery);
    tabular_q_update(result.table, s, static_cast<std::size_t>(a), h.reward, next, alpha, discount);
    if (terminal) {
      t = 0;
      energy = battery.initial_wh();
    } else {
      ++t;
      energy = h.battery.new_energy;
    }
  }

  energy = battery.initial_wh();
  for (std::size_t k = 0; k < hours; ++k) {
    const auto a = static_cast<Action>(result.table.greedy(encoder.encode(static_cast<int>(k), energy, battery)));
    result.greedy_actions.push_back(a);
    energy = apply_action(energy, battery, a, load[k]).new_energy;
  }
  result.greedy_cost = replay_plan(result.greedy_actions, load.first(hours), tariff, battery, no_dr).total_cost;
  return result;
}

}  // namespace storage_dqn
