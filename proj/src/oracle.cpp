#include "storage_dqn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {
namespace {

struct Episode {
  std::size_t first = 0;
  std::size_t length = 0;
};

std::vector<Episode> episodes_of(std::size_t hours) {
  std::vector<Episode> eps;
  for (std::size_t first = 0; first < hours; first += kHoursPerDay) {
    eps.push_back({first, std::min<std::size_t>(kHoursPerDay, hours - first)});
  }
  return eps;
}

std::size_t to_index(double offset, double quantum, std::size_t max_index) {
  const double k = std::round(offset / quantum);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), max_index);
}

// Optimal actions for one episode.
std::vector<Action> dp_episode(std::span<const double> load, const TariffSchedule& tariff,
                               const BatteryConfig& battery, const DemandResponseConfig& dr,
                               const OracleOptions& options) {
  const double q = options.quantum_wh;
  const double floor = battery.floor_wh();
  const std::size_t levels = static_cast<std::size_t>(std::floor((battery.ceiling_wh() - floor) / q + 1e-9)) + 1;
  const bool track_day = dr.enabled && dr.mode == DemandResponseMode::DailyCumulative;
  const std::size_t day_levels = track_day ? static_cast<std::size_t>(std::ceil(dr.limit_wh / q - 1e-9)) + 1 : 1;
  const std::size_t T = load.size();
  const std::size_t states = levels * day_levels;
  const double table = static_cast<double>(states) * static_cast<double>(T);
  if (table > static_cast<double>(options.state_budget)) {
    throw CapacityError("oracle state space of " + std::to_string(static_cast<std::uint64_t>(table)) +
                        " entries exceeds the budget of " + std::to_string(options.state_budget) +
                        "; use a coarser quantum");
  }

  std::vector<double> next(states, 0.0), current(states, 0.0);
  std::vector<std::uint8_t> policy(states * T, 0);
  for (std::size_t t = T; t-- > 0;) {
    const int hour = static_cast<int>(t % kHoursPerDay);
    for (std::size_t k = 0; k < levels; ++k) {
      const double energy = floor + static_cast<double>(k) * q;
      for (std::size_t j = 0; j < day_levels; ++j) {
        const double cumulative = track_day ? static_cast<double>(j) * q : 0.0;
        double best = std::numeric_limits<double>::infinity();
        std::uint8_t best_action = 0;
        for (Action a : kAllActions) {
          const auto h = simulate_hour(battery, tariff, dr, hour, energy, cumulative, a, load[t]);
          const std::size_t k2 = to_index(h.battery.new_energy - floor, q, levels - 1);
          const std::size_t j2 = track_day ? to_index(cumulative + h.battery.grid_draw, q, day_levels - 1) : 0;
          const double v = h.cost_milli + next[k2 * day_levels + j2];
          if (v < best) {
            best = v;
            best_action = static_cast<std::uint8_t>(a);
          }
        }
        current[k * day_levels + j] = best;
        policy[t * states + k * day_levels + j] = best_action;
      }
    }
    std::swap(current, next);
  }

  // follow the policy from the reset state using the exact dynamics
  std::vector<Action> actions;
  actions.reserve(T);
  double energy = battery.initial_wh();
  double cumulative = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t k = to_index(energy - floor, q, levels - 1);
    const std::size_t j = track_day ? to_index(cumulative, q, day_levels - 1) : 0;
    const Action a = static_cast<Action>(policy[t * states + k * day_levels + j]);
    const auto r = apply_action(energy, battery, a, load[t]);
    energy = r.new_energy;
    cumulative += r.grid_draw;
    actions.push_back(a);
  }
  return actions;
}

}  // namespace

DispatchPlan replay_plan(std::span<const Action> actions, std::span<const double> load,
                         const TariffSchedule& tariff, const BatteryConfig& battery,
                         const DemandResponseConfig& dr) {
  if (actions.size() != load.size()) throw DomainError("plan and load lengths differ");
  DispatchPlan plan;
  plan.actions.assign(actions.begin(), actions.end());
  for (const auto& ep : episodes_of(load.size())) {
    double energy = battery.initial_wh();
    double cumulative = 0.0;
    double milli = 0.0;
    for (std::size_t t = ep.first; t < ep.first + ep.length; ++t) {
      const auto h = simulate_hour(battery, tariff, dr, static_cast<int>((t - ep.first) % kHoursPerDay), energy,
                                   cumulative, actions[t], load[t]);
      energy = h.battery.new_energy;
      cumulative += h.battery.grid_draw;
      milli += h.cost_milli;
      plan.grid_draw.push_back(h.battery.grid_draw);
      plan.energy.push_back(energy);
    }
    plan.total_cost += milli / 1000.0;
    plan.baseline_cost += baseline_cost(load.subspan(ep.first, ep.length), tariff, dr);
  }
  return plan;
}

DispatchPlan dp_optimal(std::span<const double> load, const TariffSchedule& tariff, const BatteryConfig& battery,
                        const DemandResponseConfig& dr, const OracleOptions& options) {
  battery.check();
  dr.check();
  if (!(options.quantum_wh > 0.0)) throw ConfigError("oracle quantum must be > 0 Wh");
  std::vector<Action> actions;
  actions.reserve(load.size());
  for (const auto& ep : episodes_of(load.size())) {
    const auto part = dp_episode(load.subspan(ep.first, ep.length), tariff, battery, dr, options);
    actions.insert(actions.end(), part.begin(), part.end());
  }
  return replay_plan(actions, load, tariff, battery, dr);
}

DispatchPlan brute_force_optimal(std::span<const double> load, const TariffSchedule& tariff,
                                 const BatteryConfig& battery, const DemandResponseConfig& dr) {
  battery.check();
  dr.check();
  const std::size_t T = load.size();
  if (T > kBruteForceMaxHours) {
    throw CapacityError("brute force supports at most " + std::to_string(kBruteForceMaxHours) + " hours, got " +
                        std::to_string(T));
  }
  std::vector<Action> path(T), best_path(T, Action::GridOnly);
  double best = std::numeric_limits<double>::infinity();

  // depth-first over the action tree; costs accumulate in forward order like the replay
  auto search = [&](auto&& self, std::size_t t, double energy, double cumulative, double milli) -> void {
    if (t == T) {
      if (milli < best) {
        best = milli;
        best_path = path;
      }
      return;
    }
    for (Action a : kAllActions) {
      const auto h = simulate_hour(battery, tariff, dr, static_cast<int>(t), energy, cumulative, a, load[t]);
      path[t] = a;
      self(self, t + 1, h.battery.new_energy, cumulative + h.battery.grid_draw, milli + h.cost_milli);
    }
  };
  search(search, 0, battery.initial_wh(), 0.0, 0.0);
  return replay_plan(best_path, load, tariff, battery, dr);
}

BatteryConfig SweepBattery::at(double capacity_wh) const {
  BatteryConfig b;
  b.capacity_wh = capacity_wh;
  b.max_charge_w = rate_frac * capacity_wh;
  b.max_discharge_w = rate_frac * capacity_wh;
  b.soc_min = soc_min;
  b.soc_max = soc_max;
  return b;
}

std::vector<CurvePoint> savings_curve(std::span<const double> capacities, std::span<const double> load,
                                      const TariffSchedule& tariff, const DemandResponseConfig& dr,
                                      const SweepBattery& sweep, const OracleOptions& options) {
  if (!std::is_sorted(capacities.begin(), capacities.end())) {
    throw DomainError("savings_curve capacities must be sorted ascending");
  }
  std::vector<CurvePoint> curve;
  for (double c : capacities) {
    const auto plan = dp_optimal(load, tariff, sweep.at(c), dr, options);
    curve.push_back({c, cost_saving(plan.total_cost, plan.baseline_cost), plan.total_cost, plan.baseline_cost});
  }
  return curve;
}

std::optional<std::size_t> find_flattening(std::span<const double> savings_pct, double tolerance_pp) {
  for (std::size_t i = 0; i + 1 < savings_pct.size(); ++i) {
    if (std::abs(savings_pct[i + 1] - savings_pct[i]) < tolerance_pp) return i;
  }
  return std::nullopt;
}

}  // namespace storage_dqn
