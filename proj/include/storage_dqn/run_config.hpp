#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "storage_dqn/agent.hpp"
#include "storage_dqn/data.hpp"
#include "storage_dqn/environment.hpp"
#include "storage_dqn/kv_file.hpp"
#include "storage_dqn/oracle.hpp"

namespace storage_dqn {

// Everything a CLI run needs. Serialized as a flat file of dotted keys.
struct RunConfig {
  // tariff: a builtin name, a tariff file, or inline slots (in that order of precedence: slots, file, builtin)
  std::string tariff_builtin = "table1";
  std::string tariff_file;
  std::vector<TariffSlot> tariff_slots;
  double tariff_base_price = 0.0;

  BatteryConfig battery;
  DemandResponseConfig dr;
  int horizon_hours = 24;
  bool include_hour = false;
  std::string include_day_cumulative = "auto";  // auto | true | false

  std::string data_csv;
  SyntheticSpec synthetic;
  std::size_t train_days = 30;
  std::size_t test_days = 30;

  AgentConfig agent;

  std::string sweep_capacities = "5000..30000 step 5000";
  SweepBattery sweep_battery;
  std::size_t fine_tune_epochs = 100;
  bool sweep_cross = true;

  OracleOptions oracle;
  std::string eval_split = "test";  // test | train | all
  std::size_t probe_day = 0;

  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";

  TariffSchedule tariff() const;
  EnvConfig env_config(std::shared_ptr<const LoadProfile> load) const;
  LoadProfile load_profile() const;
  AgentConfig agent_config() const;  // agent with the run seed applied
  // (train, eval) profiles; eval follows eval_split.
  std::pair<LoadProfile, LoadProfile> split_profiles() const;

  KeyValueFile to_kv() const;
  static RunConfig from_kv(const KeyValueFile& kv);
};

// One documented config key with accessors, used for parsing, serialization and --help.
struct ConfigKey {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

// Applies `key=value` overrides. Unknown keys raise ConfigError.
void apply_override(RunConfig& config, const std::string& assignment);

std::string format_exact(double value);

}  // namespace storage_dqn
