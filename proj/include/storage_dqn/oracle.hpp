#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "storage_dqn/environment.hpp"

namespace storage_dqn {

// Optimal (or enumerated) dispatch for a sequence of episodes. Hours are grouped
// into 24-hour episodes; a trailing shorter group is its own episode. The battery
// starts each episode at its reset energy and the demand-response day total resets.
struct DispatchPlan {
  std::vector<Action> actions;
  std::vector<double> grid_draw;  // Wh per hour
  std::vector<double> energy;     // Wh stored after each hour
  double total_cost = 0.0;        // sum over episodes of episode cost
  double baseline_cost = 0.0;
};

struct OracleOptions {
  double quantum_wh = 1.0;
  // Largest (energy levels x cumulative levels x hours) table the DP may build.
  std::size_t state_budget = 200'000'000;
};

// Backward induction over (hour, quantized energy[, quantized day grid energy when
// the demand-response limit is daily]). Exact when all energy moves are whole
// multiples of the quantum; the reported cost is always the environment replay cost.
DispatchPlan dp_optimal(std::span<const double> load, const TariffSchedule& tariff, const BatteryConfig& battery,
                        const DemandResponseConfig& dr, const OracleOptions& options = {});

inline constexpr std::size_t kBruteForceMaxHours = 12;

// Exhaustive search over all 3^T action sequences for a single episode of T <= 12 hours.
DispatchPlan brute_force_optimal(std::span<const double> load, const TariffSchedule& tariff,
                                 const BatteryConfig& battery, const DemandResponseConfig& dr);

// Replays actions through the environment's step semantics.
DispatchPlan replay_plan(std::span<const Action> actions, std::span<const double> load,
                         const TariffSchedule& tariff, const BatteryConfig& battery, const DemandResponseConfig& dr);

// Battery used for capacity sweeps: charge and discharge rates are a fixed fraction
// of capacity per hour.
struct SweepBattery {
  double rate_frac = 0.7;
  double soc_min = 0.1;
  double soc_max = 0.9;

  BatteryConfig at(double capacity_wh) const;
};

struct CurvePoint {
  double capacity_wh = 0.0;
  double savings_pct = 0.0;
  double cost = 0.0;
  double baseline_cost = 0.0;
};

// Oracle savings per capacity. Capacities must be sorted ascending.
std::vector<CurvePoint> savings_curve(std::span<const double> capacities, std::span<const double> load,
                                      const TariffSchedule& tariff, const DemandResponseConfig& dr,
                                      const SweepBattery& sweep = {}, const OracleOptions& options = {});

// First index i where |savings[i+1] - savings[i]| < tolerance_pp, i.e. the capacity
// beyond which the curve is flat.
std::optional<std::size_t> find_flattening(std::span<const double> savings_pct, double tolerance_pp = 0.5);

}  // namespace storage_dqn
