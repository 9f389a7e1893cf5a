#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storage_dqn/data.hpp"
#include "storage_dqn/tariff.hpp"

namespace storage_dqn {

// Battery limits. Energies in Wh, rates in W.
struct BatteryConfig {
  double capacity_wh = 900.0;
  double max_charge_w = 300.0;
  double max_discharge_w = 300.0;
  double soc_min = 0.0;
  double soc_max = 1.0;
  // Stored energy at reset, as a fraction of capacity. Defaults to soc_min.
  std::optional<double> initial_frac;

  void check() const;
  double floor_wh() const { return soc_min * capacity_wh; }
  double ceiling_wh() const { return soc_max * capacity_wh; }
  double initial_wh() const;
};

// Network output ordering is fixed by these indices.
enum class Action : int { GridOnly = 0, DischargePlusGrid = 1, ChargePlusGrid = 2 };
inline constexpr int kNumActions = 3;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::GridOnly, Action::DischargePlusGrid, Action::ChargePlusGrid};

std::string_view to_string(Action a);
Action action_from_index(int index);

struct ActionResult {
  double new_energy = 0.0;
  double grid_draw = 0.0;
  double charge = 0.0;
  double discharge = 0.0;
};

// Battery transition for one interval. Infeasible charge/discharge clips to the
// SoC bounds; the battery never exports and never serves more than the load.
ActionResult apply_action(double energy, const BatteryConfig& battery, Action action, double load_wh,
                          double dt_hours = 1.0);

// Demand-response penalty in currency for one interval. `day_cumulative_grid` is the
// grid energy already drawn today, before this interval.
double penalty(double grid_draw, double day_cumulative_grid, const DemandResponseConfig& dr);

// -(price * grid_draw / 1000) - penalty. The penalty is subtracted so that exceeding
// the limit always lowers the reward.
double reward(double price, double grid_draw, double penalty_value);

// Everything that happens in one hour, with the bill in milli-currency
// (price per kWh times Wh). Episode costs sum these and divide by 1000 once, which
// keeps them exact whenever prices are dyadic and energies are whole Wh.
struct HourOutcome {
  ActionResult battery;
  double price = 0.0;
  double penalty = 0.0;      // currency
  double cost_milli = 0.0;   // price * grid + penalty_rate * excess
  double reward = 0.0;
};

HourOutcome simulate_hour(const BatteryConfig& battery, const TariffSchedule& tariff,
                          const DemandResponseConfig& dr, int hour, double energy,
                          double day_cumulative_grid, Action action, double load_wh);

// Cost of serving one day's load straight from the grid.
double baseline_cost(std::span<const double> day_load, const TariffSchedule& tariff,
                     const DemandResponseConfig& dr);

// Percentage saving relative to the baseline. Throws DomainError when baseline <= 0.
double cost_saving(double agent_cost, double baseline);

using Observation = std::vector<double>;

struct EnvConfig {
  TariffSchedule tariff = builtin_schedule("table1");
  BatteryConfig battery;
  DemandResponseConfig dr;
  std::shared_ptr<const LoadProfile> load;
  int horizon_hours = 24;  // price lookahead n
  bool include_hour = false;
  // Today's cumulative grid energy as an extra field. Defaults to dr.enabled.
  std::optional<bool> include_day_cumulative;
  // Optional per-hour price forecast aligned with the load profile; read by the
  // lookahead instead of the static schedule where it has data.
  std::vector<double> price_forecast;

  void check() const;
  bool day_cumulative_in_obs() const { return include_day_cumulative.value_or(dr.enabled); }
  std::size_t observation_size() const;
  // Per-field lower/upper bounds, used for optional min-max input scaling.
  std::pair<std::vector<double>, std::vector<double>> observation_bounds() const;
};

struct StepOutcome {
  Observation next_observation;
  double reward = 0.0;
  double grid_draw = 0.0;
  bool done = false;

  double price = 0.0;
  double load = 0.0;
  double charge = 0.0;
  double discharge = 0.0;
  double penalty = 0.0;
  double cost_milli = 0.0;
  double energy_after = 0.0;
};

// One calendar day per episode, hourly steps.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  const Observation& reset(std::size_t day_index);
  StepOutcome step(Action action);

  const EnvConfig& config() const { return config_; }
  std::size_t observation_size() const { return config_.observation_size(); }
  const Observation& observation() const { return observation_; }
  bool done() const { return hour_ >= kHoursPerDay; }
  int hour() const { return hour_; }
  double energy() const { return energy_; }
  double day_cumulative_grid() const { return day_grid_; }
  // Cost accumulated since reset, in currency.
  double episode_cost() const { return cost_milli_ / 1000.0; }
  std::size_t day_count() const { return config_.load->day_count(); }

 private:
  void build_observation();

  EnvConfig config_;
  std::size_t day_ = 0;
  int hour_ = kHoursPerDay;
  double energy_ = 0.0;
  double day_grid_ = 0.0;
  double cost_milli_ = 0.0;
  Observation observation_;
};

}  // namespace storage_dqn
