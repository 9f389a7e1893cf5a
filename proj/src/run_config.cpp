#include "storage_dqn/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

namespace {

double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return value;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

// Accessors take a mutable config; getters only read through them.
template <class Ref>
ConfigKey double_key(std::string key, std::string help, Ref ref) {
  return {key, std::move(help), [ref](const RunConfig& c) { return format_exact(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_double(key, v); }};
}

template <class Ref>
ConfigKey unsigned_key(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(ref(c))>;
            ref(c) = static_cast<T>(parse_unsigned(key, v));
          }};
}

template <class Ref>
ConfigKey bool_key(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }};
}

template <class Ref>
ConfigKey string_key(std::string key, std::string help, Ref ref) {
  return {key, std::move(help), [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = v; }};
}

template <class Ref>
ConfigKey choice_key(std::string key, std::string help, std::vector<std::string> choices, Ref ref) {
  return {key, std::move(help), [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref, key, choices](RunConfig& c, const std::string& v) {
            if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
              std::string list;
              for (const auto& ch : choices) list += (list.empty() ? "" : ", ") + ch;
              throw ConfigError(key + ": expected one of " + list + ", got '" + v + "'");
            }
            ref(c) = v;
          }};
}

template <class Ref>
ConfigKey widths_key(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [ref](const RunConfig& c) {
            std::string out;
            for (int w : ref(const_cast<RunConfig&>(c))) out += (out.empty() ? "" : ",") + std::to_string(w);
            return out;
          },
          [ref, key](RunConfig& c, const std::string& v) {
            std::vector<int> widths;
            std::size_t pos = 0;
            while (!v.empty() && pos <= v.size()) {
              std::size_t comma = std::min(v.find(',', pos), v.size());
              widths.push_back(static_cast<int>(parse_unsigned(key, v.substr(pos, comma - pos))));
              pos = comma + 1;
            }
            ref(c) = std::move(widths);
          }};
}

std::string slot_text(const TariffSlot& s) {
  return std::to_string(s.start_hour) + "," + std::to_string(s.end_hour) + "," + format_exact(s.adder);
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back(string_key("tariff.builtin", "builtin schedule: table1 or tata",
                         [](RunConfig& c) -> std::string& { return c.tariff_builtin; }));
  k.push_back(string_key("tariff.file", "tariff file (base_price and slot entries); overrides tariff.builtin",
                         [](RunConfig& c) -> std::string& { return c.tariff_file; }));
  k.push_back(double_key("tariff.base_price", "base price for inline slots, currency/kWh",
                         [](RunConfig& c) -> double& { return c.tariff_base_price; }));
  k.push_back({"tariff.slot", "inline slot \"start,end,adder\" (repeatable; empty value clears)",
               [](const RunConfig&) { return std::string(); },
               [](RunConfig& c, const std::string& v) {
                 if (v.empty()) {
                   c.tariff_slots.clear();
                   return;
                 }
                 append_slot(c.tariff_slots, parse_slot(v));
               }});

  k.push_back(double_key("battery.capacity_wh", "battery capacity, Wh",
                         [](RunConfig& c) -> double& { return c.battery.capacity_wh; }));
  k.push_back(double_key("battery.max_charge_w", "charge limit per hour, W",
                         [](RunConfig& c) -> double& { return c.battery.max_charge_w; }));
  k.push_back(double_key("battery.max_discharge_w", "discharge limit per hour, W",
                         [](RunConfig& c) -> double& { return c.battery.max_discharge_w; }));
  k.push_back(double_key("battery.soc_min", "lowest state of charge fraction",
                         [](RunConfig& c) -> double& { return c.battery.soc_min; }));
  k.push_back(double_key("battery.soc_max", "highest state of charge fraction",
                         [](RunConfig& c) -> double& { return c.battery.soc_max; }));
  k.push_back({"battery.initial_frac", "state of charge at reset (empty: soc_min)",
               [](const RunConfig& c) {
                 return c.battery.initial_frac ? format_exact(*c.battery.initial_frac) : std::string();
               },
               [](RunConfig& c, const std::string& v) {
                 if (v.empty())
                   c.battery.initial_frac.reset();
                 else
                   c.battery.initial_frac = parse_double("battery.initial_frac", v);
               }});

  k.push_back(bool_key("dr.enabled", "apply the demand-response penalty",
                       [](RunConfig& c) -> bool& { return c.dr.enabled; }));
  k.push_back(double_key("dr.limit_wh", "grid energy limit, Wh",
                         [](RunConfig& c) -> double& { return c.dr.limit_wh; }));
  k.push_back({"dr.mode", "per_interval or daily_cumulative",
               [](const RunConfig& c) { return std::string(to_string(c.dr.mode)); },
               [](RunConfig& c, const std::string& v) { c.dr.mode = parse_dr_mode(v); }});
  k.push_back(double_key("dr.penalty_rate", "penalty per kWh above the limit",
                         [](RunConfig& c) -> double& { return c.dr.penalty_rate; }));

  k.push_back(unsigned_key("env.horizon_hours", "price lookahead length in the observation",
                           [](RunConfig& c) -> int& { return c.horizon_hours; }));
  k.push_back(bool_key("env.include_hour", "append hour-of-day fraction to the observation",
                       [](RunConfig& c) -> bool& { return c.include_hour; }));
  k.push_back(choice_key("env.include_day_cumulative",
                         "append day grid total to the observation: auto (when dr.enabled), true, false",
                         {"auto", "true", "false"}, [](RunConfig& c) -> std::string& { return c.include_day_cumulative; }));

  k.push_back(string_key("data.csv", "hourly load CSV (hour_index,load_wh); empty uses the synthetic profile",
                         [](RunConfig& c) -> std::string& { return c.data_csv; }));
  k.push_back(double_key("data.synthetic.base_load_w", "synthetic base load, W",
                         [](RunConfig& c) -> double& { return c.synthetic.base_load_w; }));
  k.push_back(double_key("data.synthetic.evening_peak_w", "synthetic peak load, W",
                         [](RunConfig& c) -> double& { return c.synthetic.evening_peak_w; }));
  k.push_back(unsigned_key("data.synthetic.peak_start", "first peak hour",
                           [](RunConfig& c) -> int& { return c.synthetic.peak_start; }));
  k.push_back(unsigned_key("data.synthetic.peak_end", "one past the last peak hour",
                           [](RunConfig& c) -> int& { return c.synthetic.peak_end; }));
  k.push_back(double_key("data.synthetic.noise_frac", "multiplicative noise amplitude",
                         [](RunConfig& c) -> double& { return c.synthetic.noise_frac; }));
  k.push_back(unsigned_key("data.synthetic.seed", "synthetic profile seed",
                           [](RunConfig& c) -> std::uint64_t& { return c.synthetic.seed; }));
  k.push_back(unsigned_key("data.synthetic.days", "synthetic profile length, days",
                           [](RunConfig& c) -> int& { return c.synthetic.days; }));
  k.push_back(unsigned_key("data.train_days", "training days taken from the start of the profile",
                           [](RunConfig& c) -> std::size_t& { return c.train_days; }));
  k.push_back(unsigned_key("data.test_days", "evaluation days following the training days",
                           [](RunConfig& c) -> std::size_t& { return c.test_days; }));

  k.push_back(unsigned_key("agent.batch_size", "minibatch size",
                           [](RunConfig& c) -> std::size_t& { return c.agent.batch_size; }));
  k.push_back(unsigned_key("agent.replay_capacity", "replay buffer capacity",
                           [](RunConfig& c) -> std::size_t& { return c.agent.replay_capacity; }));
  k.push_back(double_key("agent.discount", "discount factor",
                         [](RunConfig& c) -> double& { return c.agent.discount; }));
  k.push_back(double_key("agent.learning_rate", "SGD learning rate",
                         [](RunConfig& c) -> double& { return c.agent.learning_rate; }));
  k.push_back(double_key("agent.momentum", "SGD momentum (0 is plain SGD)",
                         [](RunConfig& c) -> double& { return c.agent.momentum; }));
  k.push_back(double_key("agent.epsilon_initial", "exploration rate at step 0",
                         [](RunConfig& c) -> double& { return c.agent.epsilon_initial; }));
  k.push_back(double_key("agent.epsilon_final", "exploration rate after decay",
                         [](RunConfig& c) -> double& { return c.agent.epsilon_final; }));
  k.push_back(unsigned_key("agent.epsilon_decay_steps", "decay length in steps (0: 80% of training)",
                           [](RunConfig& c) -> std::size_t& { return c.agent.epsilon_decay_steps; }));
  k.push_back(unsigned_key("agent.target_update_every", "target network sync period, episodes",
                           [](RunConfig& c) -> std::size_t& { return c.agent.target_update_every; }));
  k.push_back(unsigned_key("agent.epochs", "training epochs",
                           [](RunConfig& c) -> std::size_t& { return c.agent.epochs; }));
  k.push_back(unsigned_key("agent.warmup_transitions", "transitions collected before learning starts",
                           [](RunConfig& c) -> std::size_t& { return c.agent.warmup_transitions; }));
  k.push_back(unsigned_key("agent.checkpoint_every", "checkpoint period, epochs",
                           [](RunConfig& c) -> std::size_t& { return c.agent.checkpoint_every; }));
  k.push_back(unsigned_key("agent.history_days", "days per epoch (rolling window over the data)",
                           [](RunConfig& c) -> std::size_t& { return c.agent.history_days; }));
  k.push_back(unsigned_key("agent.train_every", "environment steps per gradient step",
                           [](RunConfig& c) -> std::size_t& { return c.agent.train_every; }));
  k.push_back(bool_key("agent.double_dqn", "double DQN targets",
                       [](RunConfig& c) -> bool& { return c.agent.double_dqn; }));
  k.push_back(double_key("agent.reward_scale", "multiplier on rewards stored in replay (0: automatic)",
                         [](RunConfig& c) -> double& { return c.agent.reward_scale; }));
  k.push_back(double_key("agent.grad_clip", "global gradient norm clip (0 disables)",
                         [](RunConfig& c) -> double& { return c.agent.grad_clip; }));
  k.push_back(bool_key("agent.normalize_inputs", "min-max scale observations to [0,1]",
                       [](RunConfig& c) -> bool& { return c.agent.normalize_inputs; }));
  k.push_back(widths_key("network.trunk", "shared hidden layer widths, comma separated",
                         [](RunConfig& c) -> std::vector<int>& { return c.agent.layers.trunk_sizes; }));
  k.push_back(widths_key("network.stream", "value/advantage stream hidden widths, comma separated",
                         [](RunConfig& c) -> std::vector<int>& { return c.agent.layers.stream_sizes; }));
  k.push_back(double_key("replay.alpha", "prioritization exponent",
                         [](RunConfig& c) -> double& { return c.agent.per_alpha; }));
  k.push_back(double_key("replay.beta_initial", "importance-sampling exponent at the start",
                         [](RunConfig& c) -> double& { return c.agent.per_beta_initial; }));
  k.push_back(double_key("replay.beta_final", "importance-sampling exponent at the end",
                         [](RunConfig& c) -> double& { return c.agent.per_beta_final; }));
  k.push_back(bool_key("replay.anneal_beta", "anneal beta linearly over training",
                       [](RunConfig& c) -> bool& { return c.agent.per_anneal_beta; }));
  k.push_back(double_key("replay.priority_floor", "added to |td error| for priorities",
                         [](RunConfig& c) -> double& { return c.agent.per_priority_floor; }));
  k.push_back(bool_key("replay.stratified", "stratified minibatch sampling",
                       [](RunConfig& c) -> bool& { return c.agent.per_stratified; }));

  k.push_back(string_key("sweep.capacities", "capacities, \"lo..hi step s\" or a comma list, Wh",
                         [](RunConfig& c) -> std::string& { return c.sweep_capacities; }));
  k.push_back(double_key("sweep.rate_frac", "charge/discharge rate as a fraction of capacity per hour",
                         [](RunConfig& c) -> double& { return c.sweep_battery.rate_frac; }));
  k.push_back(double_key("sweep.soc_min", "sweep battery lowest state of charge",
                         [](RunConfig& c) -> double& { return c.sweep_battery.soc_min; }));
  k.push_back(double_key("sweep.soc_max", "sweep battery highest state of charge",
                         [](RunConfig& c) -> double& { return c.sweep_battery.soc_max; }));
  k.push_back(unsigned_key("sweep.fine_tune_epochs", "demand-response fine-tuning epochs",
                           [](RunConfig& c) -> std::size_t& { return c.fine_tune_epochs; }));
  k.push_back(bool_key("sweep.cross", "evaluate every agent on every capacity",
                       [](RunConfig& c) -> bool& { return c.sweep_cross; }));

  k.push_back(double_key("oracle.quantum_wh", "energy grid step of the dispatch oracle, Wh",
                         [](RunConfig& c) -> double& { return c.oracle.quantum_wh; }));
  k.push_back(unsigned_key("oracle.state_budget", "largest oracle table, states",
                           [](RunConfig& c) -> std::size_t& { return c.oracle.state_budget; }));
  k.push_back(choice_key("eval.split", "days evaluated by eval, oracle and explain: test, train or all",
                         {"test", "train", "all"}, [](RunConfig& c) -> std::string& { return c.eval_split; }));
  k.push_back(unsigned_key("explain.probe_day", "evaluation day used for histograms",
                           [](RunConfig& c) -> std::size_t& { return c.probe_day; }));

  k.push_back(unsigned_key("seed", "run seed; all training randomness derives from it",
                           [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
  k.push_back(string_key("output.dir", "output directory (STORAGE_DQN_OUT overrides)",
                         [](RunConfig& c) -> std::string& { return c.output_dir; }));
  return k;
}

const ConfigKey* find_key(std::string_view key) {
  for (const ConfigKey& k : config_keys())
    if (k.key == key) return &k;
  return nullptr;
}

void set_key(RunConfig& config, const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  k->set(config, value);
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

KeyValueFile RunConfig::to_kv() const {
  KeyValueFile kv;
  for (const ConfigKey& k : config_keys()) {
    if (k.key == "tariff.slot") {
      for (const TariffSlot& s : tariff_slots) kv.append(k.key, slot_text(s));
      continue;
    }
    kv.append(k.key, k.get(*this));
  }
  return kv;
}

RunConfig RunConfig::from_kv(const KeyValueFile& kv) {
  RunConfig config;
  for (const auto& [key, value] : kv.entries()) set_key(config, key, value);
  return config;
}

TariffSchedule RunConfig::tariff() const {
  if (!tariff_slots.empty()) return TariffSchedule(tariff_slots, tariff_base_price);
  if (!tariff_file.empty()) return load_tariff_file(tariff_file);
  return builtin_schedule(tariff_builtin);
}

EnvConfig RunConfig::env_config(std::shared_ptr<const LoadProfile> load) const {
  EnvConfig env;
  env.tariff = tariff();
  env.battery = battery;
  env.dr = dr;
  env.load = std::move(load);
  env.horizon_hours = horizon_hours;
  env.include_hour = include_hour;
  if (include_day_cumulative == "true")
    env.include_day_cumulative = true;
  else if (include_day_cumulative == "false")
    env.include_day_cumulative = false;
  else if (include_day_cumulative != "auto")
    throw ConfigError("env.include_day_cumulative: expected auto, true or false");
  return env;
}

LoadProfile RunConfig::load_profile() const {
  if (!data_csv.empty()) return load_csv(data_csv);
  return generate(synthetic);
}

std::pair<LoadProfile, LoadProfile> RunConfig::split_profiles() const {
  LoadProfile full = load_profile();
  auto [train, test] = split(full, train_days, test_days);
  if (eval_split == "test") {
    if (test.day_count() == 0) throw ConfigError("eval.split = test but data.test_days is 0");
    return {std::move(train), std::move(test)};
  }
  if (eval_split == "train") return {train, train};
  if (eval_split == "all") return {std::move(train), std::move(full)};
  throw ConfigError("eval.split: expected test, train or all, got '" + eval_split + "'");
}

AgentConfig RunConfig::agent_config() const {
  AgentConfig a = agent;
  a.seed = seed;
  return a;
}

}  // namespace storage_dqn
