#include "storage_dqn/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

void BatteryConfig::check() const {
  if (!(capacity_wh >= 0.0) || !std::isfinite(capacity_wh)) throw ConfigError("battery capacity must be >= 0");
  if (!(max_charge_w >= 0.0) || !(max_discharge_w >= 0.0)) throw ConfigError("battery rates must be >= 0");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0)) {
    throw ConfigError("battery SoC bounds must satisfy 0 <= soc_min < soc_max <= 1");
  }
  if (initial_frac && !(*initial_frac >= soc_min && *initial_frac <= soc_max)) {
    throw ConfigError("battery initial_frac must lie within [soc_min, soc_max]");
  }
}

double BatteryConfig::initial_wh() const { return initial_frac.value_or(soc_min) * capacity_wh; }

std::string_view to_string(Action a) {
  switch (a) {
    case Action::GridOnly:
      return "grid";
    case Action::DischargePlusGrid:
      return "discharge";
    case Action::ChargePlusGrid:
      return "charge";
  }
  return "?";
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) throw DomainError("action index out of range: " + std::to_string(index));
  return static_cast<Action>(index);
}

ActionResult apply_action(double energy, const BatteryConfig& battery, Action action, double load_wh,
                          double dt_hours) {
  ActionResult r;
  r.new_energy = energy;
  r.grid_draw = load_wh;
  switch (action) {
    case Action::GridOnly:
      break;
    case Action::DischargePlusGrid: {
      const double available = std::max(0.0, energy - battery.floor_wh());
      r.discharge = std::min({battery.max_discharge_w * dt_hours, available, load_wh});
      r.new_energy = energy - r.discharge;
      r.grid_draw = load_wh - r.discharge;
      break;
    }
    case Action::ChargePlusGrid: {
      const double headroom = std::max(0.0, battery.ceiling_wh() - energy);
      r.charge = std::min(battery.max_charge_w * dt_hours, headroom);
      r.new_energy = energy + r.charge;
      r.grid_draw = load_wh + r.charge;
      break;
    }
  }
  return r;
}

namespace {

// Penalized energy (Wh) for one interval.
double excess_wh(double grid_draw, double day_cumulative_grid, const DemandResponseConfig& dr) {
  if (!dr.enabled) return 0.0;
  if (dr.mode == DemandResponseMode::PerInterval) return std::max(0.0, grid_draw - dr.limit_wh);
  const double before = std::max(0.0, day_cumulative_grid - dr.limit_wh);
  const double after = std::max(0.0, day_cumulative_grid + grid_draw - dr.limit_wh);
  return after - before;
}

}  // namespace

double penalty(double grid_draw, double day_cumulative_grid, const DemandResponseConfig& dr) {
  return dr.penalty_rate * excess_wh(grid_draw, day_cumulative_grid, dr) / 1000.0;
}

double reward(double price, double grid_draw, double penalty_value) {
  return -(price * grid_draw / 1000.0) - penalty_value;
}

HourOutcome simulate_hour(const BatteryConfig& battery, const TariffSchedule& tariff,
                          const DemandResponseConfig& dr, int hour, double energy,
                          double day_cumulative_grid, Action action, double load_wh) {
  HourOutcome out;
  out.battery = apply_action(energy, battery, action, load_wh);
  out.price = tariff.price_at(hour);
  const double excess = excess_wh(out.battery.grid_draw, day_cumulative_grid, dr);
  out.penalty = dr.enabled ? dr.penalty_rate * excess / 1000.0 : 0.0;
  out.cost_milli = out.price * out.battery.grid_draw + (dr.enabled ? dr.penalty_rate * excess : 0.0);
  out.reward = reward(out.price, out.battery.grid_draw, out.penalty);
  return out;
}

double baseline_cost(std::span<const double> day_load, const TariffSchedule& tariff,
                     const DemandResponseConfig& dr) {
  const BatteryConfig none{0.0, 0.0, 0.0, 0.0, 1.0, std::nullopt};
  double milli = 0.0;
  double cumulative = 0.0;
  for (std::size_t t = 0; t < day_load.size(); ++t) {
    const auto h = simulate_hour(none, tariff, dr, static_cast<int>(t % kHoursPerDay), 0.0, cumulative,
                                 Action::GridOnly, day_load[t]);
    milli += h.cost_milli;
    cumulative += h.battery.grid_draw;
    if ((t + 1) % kHoursPerDay == 0) cumulative = 0.0;
  }
  return milli / 1000.0;
}

double cost_saving(double agent_cost, double baseline) {
  if (!(baseline > 0.0)) throw DomainError("cost_saving needs a positive baseline cost");
  return (1.0 - agent_cost / baseline) * 100.0;
}

void EnvConfig::check() const {
  battery.check();
  dr.check();
  if (!load || load->day_count() == 0) throw ConfigError("environment needs a load profile with >= 1 day");
  if (horizon_hours < 1) throw ConfigError("price lookahead horizon must be >= 1");
  if (!price_forecast.empty() && price_forecast.size() != load->hourly().size()) {
    throw ConfigError("price forecast length must match the load profile");
  }
}

std::size_t EnvConfig::observation_size() const {
  return static_cast<std::size_t>(horizon_hours) + 2 + (include_hour ? 1 : 0) +
         (day_cumulative_in_obs() ? 1 : 0);
}

std::pair<std::vector<double>, std::vector<double>> EnvConfig::observation_bounds() const {
  double price_lo = tariff.min_price();
  double price_hi = tariff.max_price();
  for (double p : price_forecast) {
    price_lo = std::min(price_lo, p);
    price_hi = std::max(price_hi, p);
  }
  double load_hi = load ? load->max_load() : 0.0;
  double day_hi = 0.0;
  if (load) {
    for (std::size_t d = 0; d < load->day_count(); ++d) {
      const auto day = load->day(d);
      day_hi = std::max(day_hi, std::accumulate(day.begin(), day.end(), 0.0));
    }
  }
  day_hi += battery.capacity_wh;

  std::vector<double> lo, hi;
  for (int i = 0; i < horizon_hours; ++i) {
    lo.push_back(price_lo);
    hi.push_back(price_hi);
  }
  lo.push_back(0.0);
  hi.push_back(1.0);
  lo.push_back(0.0);
  hi.push_back(load_hi);
  if (include_hour) {
    lo.push_back(0.0);
    hi.push_back(1.0);
  }
  if (day_cumulative_in_obs()) {
    lo.push_back(0.0);
    hi.push_back(day_hi);
  }
  return {lo, hi};
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  config_.check();
  observation_.assign(config_.observation_size(), 0.0);
}

const Observation& Environment::reset(std::size_t day_index) {
  if (day_index >= config_.load->day_count()) {
    throw DomainError("day " + std::to_string(day_index) + " out of range (profile has " +
                      std::to_string(config_.load->day_count()) + " days)");
  }
  day_ = day_index;
  hour_ = 0;
  energy_ = config_.battery.initial_wh();
  day_grid_ = 0.0;
  cost_milli_ = 0.0;
  build_observation();
  return observation_;
}

StepOutcome Environment::step(Action action) {
  if (done()) throw UsageError("step called on a finished episode; call reset first");
  const double load = config_.load->day(day_)[static_cast<std::size_t>(hour_)];
  const auto h = simulate_hour(config_.battery, config_.tariff, config_.dr, hour_, energy_, day_grid_,
                               action, load);
  energy_ = h.battery.new_energy;
  day_grid_ += h.battery.grid_draw;
  cost_milli_ += h.cost_milli;
  ++hour_;
  build_observation();

  StepOutcome out;
  out.next_observation = observation_;
  out.reward = h.reward;
  out.grid_draw = h.battery.grid_draw;
  out.done = done();
  out.price = h.price;
  out.load = load;
  out.charge = h.battery.charge;
  out.discharge = h.battery.discharge;
  out.penalty = h.penalty;
  out.cost_milli = h.cost_milli;
  out.energy_after = energy_;
  return out;
}

void Environment::build_observation() {
  const std::size_t base = day_ * kHoursPerDay;
  const std::size_t n = static_cast<std::size_t>(config_.horizon_hours);
  const auto& forecast = config_.price_forecast;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t global = base + static_cast<std::size_t>(hour_) + i;
    observation_[i] = global < forecast.size() ? forecast[global]
                                               : config_.tariff.price_at(static_cast<int>(global % kHoursPerDay));
  }
  const double cap = config_.battery.capacity_wh;
  observation_[n] = cap > 0.0 ? energy_ / cap : 0.0;
  observation_[n + 1] = done() ? 0.0 : config_.load->day(day_)[static_cast<std::size_t>(hour_)];
  std::size_t k = n + 2;
  if (config_.include_hour) observation_[k++] = static_cast<double>(hour_ % kHoursPerDay) / kHoursPerDay;
  if (config_.day_cumulative_in_obs()) observation_[k++] = day_grid_;
}

}  // namespace storage_dqn
