#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "storage_dqn/agent.hpp"
#include "storage_dqn/oracle.hpp"

namespace storage_dqn {

struct TraceRow {
  int hour = 0;
  double price = 0.0;
  double load_wh = 0.0;
  Action action = Action::GridOnly;
  double battery_wh = 0.0;  // after the action
  double grid_wh = 0.0;
  double reward = 0.0;
  double charge_wh = 0.0;
  double discharge_wh = 0.0;
};

// One day of policy behavior.
struct EpisodeTrace {
  std::size_t day = 0;
  double initial_battery_wh = 0.0;
  double cost = 0.0;
  double baseline_cost = 0.0;
  std::vector<TraceRow> rows;
};

struct Evaluation {
  std::vector<EpisodeTrace> traces;
  double cost = 0.0;
  double baseline_cost = 0.0;
  double savings_pct = 0.0;
};

// Greedy (epsilon = 0) rollout over the given days of env_config.load (all days when empty).
Evaluation evaluate(const NetworkParams& params, const EnvConfig& env_config, std::vector<std::size_t> days = {});

// Oracle plan rendered as traces, one per day, for side-by-side comparison.
std::vector<EpisodeTrace> traces_from_plan(const DispatchPlan& plan, std::span<const double> load,
                                           const TariffSchedule& tariff, const BatteryConfig& battery,
                                           const DemandResponseConfig& dr);

struct SlotActivity {
  int start_hour = 0;
  int end_hour = 24;
  double price = 0.0;
  double charged_wh = 0.0;
  double discharged_wh = 0.0;
  int idle_hours = 0;
};

struct SlotActionHistogram {
  std::size_t epoch = 0;
  std::vector<SlotActivity> slots;  // in tariff slot order

  double charged_total() const;
  double discharged_total() const;
  // Share of charged / discharged Wh that falls in [start_hour, end_hour). 0 when nothing moved.
  double charged_share(int start_hour, int end_hour) const;
  double discharged_share(int start_hour, int end_hour) const;
};

SlotActionHistogram slot_histogram(const EpisodeTrace& trace, const TariffSchedule& tariff, std::size_t epoch = 0);

// Greedy-policy histogram on the probe day for every checkpoint, in checkpoint order.
std::vector<SlotActionHistogram> learning_progression(const std::vector<Checkpoint>& checkpoints,
                                                      const EnvConfig& env_config, std::size_t probe_day);

struct SweepRow {
  double train_capacity_wh = 0.0;
  double eval_capacity_wh = 0.0;
  double savings_pct = 0.0;
  double oracle_savings_pct = 0.0;
  std::optional<double> fraction_of_oracle;  // savings / oracle when oracle > 0
};

struct SweepResult {
  std::vector<double> capacities;
  std::vector<SweepRow> rows;  // train-major order

  const SweepRow* cell(double train_capacity, double eval_capacity) const;
  std::vector<SweepRow> diagonal() const;
};

SweepRow make_row(double train_capacity, double eval_capacity, double savings, double oracle_savings);

// Everything a sweep needs besides the capacity list.
struct SweepSpec {
  EnvConfig env;  // tariff, dr, observation flags; battery is replaced per capacity
  std::shared_ptr<const LoadProfile> train_load;
  std::shared_ptr<const LoadProfile> eval_load;
  AgentConfig agent;
  SweepBattery battery;
  OracleOptions oracle;
  std::size_t jobs = 1;
  // Train-major cross evaluation; false evaluates each agent only on its own capacity.
  bool cross = true;
};

struct CapacitySweep {
  SweepResult result;
  std::vector<NetworkParams> agents;  // one per capacity, in capacity order
};

// Trains one agent per capacity and evaluates it on every capacity.
CapacitySweep capacity_sweep(const std::vector<double>& capacities, const SweepSpec& spec);

struct DrComparison {
  SweepResult tod;
  SweepResult tod_dr;  // diagonal only
  std::optional<std::size_t> tod_flattening;
  std::optional<std::size_t> tod_dr_flattening;
};

// ToD-only arm trained from scratch; DR arm fine-tuned from it with the demand-response
// penalty switched on. Both observe the day-cumulative grid field so shapes match.
DrComparison dr_comparison(const std::vector<double>& capacities, const SweepSpec& spec,
                           const DemandResponseConfig& dr_config, std::size_t fine_tune_epochs);

// Parses "5000..30000 step 5000" or a comma list.
std::vector<double> parse_capacities(const std::string& text);

struct Report {
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::pair<std::string, EpisodeTrace>> traces;
  std::vector<std::pair<std::string, SlotActionHistogram>> histograms;
  std::optional<SweepResult> sweep;
  std::optional<SweepResult> dr_sweep;
};

// Writes traces/, histograms/, sweep.csv, cross_matrix.csv, sweep_dr.csv and
// summary.json under output_dir. Numbers use 6 significant digits.
void emit_report(const Report& report, const std::string& output_dir);

void write_trace_csv(const EpisodeTrace& trace, const std::string& path);
std::string format_number(double value);

}  // namespace storage_dqn
