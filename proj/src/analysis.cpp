#include "storage_dqn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

namespace fs = std::filesystem;

std::string format_number(double value) {
  if (value == 0.0) return "0";  // avoids "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

Evaluation evaluate(const NetworkParams& params, const EnvConfig& env_config, std::vector<std::size_t> days) {
  Environment env(env_config);
  if (params.input_dim != static_cast<int>(env.observation_size())) {
    throw ShapeError("checkpoint expects observations of length " + std::to_string(params.input_dim) +
                     ", environment produces " + std::to_string(env.observation_size()));
  }
  if (days.empty()) {
    days.resize(env.day_count());
    for (std::size_t d = 0; d < days.size(); ++d) days[d] = d;
  }
  Evaluation ev;
  for (std::size_t day : days) {
    EpisodeTrace trace;
    trace.day = day;
    Observation obs = env.reset(day);
    trace.initial_battery_wh = env.energy();
    while (!env.done()) {
      const int hour = env.hour();
      const auto action = static_cast<Action>(greedy_action(forward(params, obs)));
      auto out = env.step(action);
      trace.rows.push_back({hour, out.price, out.load, action, out.energy_after, out.grid_draw, out.reward,
                            out.charge, out.discharge});
      obs = std::move(out.next_observation);
    }
    trace.cost = env.episode_cost();
    trace.baseline_cost = baseline_cost(env_config.load->day(day), env_config.tariff, env_config.dr);
    ev.cost += trace.cost;
    ev.baseline_cost += trace.baseline_cost;
    ev.traces.push_back(std::move(trace));
  }
  ev.savings_pct = ev.baseline_cost > 0.0 ? cost_saving(ev.cost, ev.baseline_cost) : 0.0;
  return ev;
}

std::vector<EpisodeTrace> traces_from_plan(const DispatchPlan& plan, std::span<const double> load,
                                           const TariffSchedule& tariff, const BatteryConfig& battery,
                                           const DemandResponseConfig& dr) {
  if (plan.actions.size() != load.size()) throw DomainError("plan and load lengths differ");
  std::vector<EpisodeTrace> traces;
  for (std::size_t first = 0; first < load.size(); first += kHoursPerDay) {
    const std::size_t len = std::min<std::size_t>(kHoursPerDay, load.size() - first);
    EpisodeTrace trace;
    trace.day = first / kHoursPerDay;
    trace.initial_battery_wh = battery.initial_wh();
    double energy = trace.initial_battery_wh;
    double cumulative = 0.0;
    double milli = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const Action a = plan.actions[first + t];
      const auto h = simulate_hour(battery, tariff, dr, static_cast<int>(t), energy, cumulative, a, load[first + t]);
      energy = h.battery.new_energy;
      cumulative += h.battery.grid_draw;
      milli += h.cost_milli;
      trace.rows.push_back({static_cast<int>(t), h.price, load[first + t], a, energy, h.battery.grid_draw, h.reward,
                            h.battery.charge, h.battery.discharge});
    }
    trace.cost = milli / 1000.0;
    trace.baseline_cost = baseline_cost(load.subspan(first, len), tariff, dr);
    traces.push_back(std::move(trace));
  }
  return traces;
}

double SlotActionHistogram::charged_total() const {
  double s = 0.0;
  for (const auto& slot : slots) s += slot.charged_wh;
  return s;
}

double SlotActionHistogram::discharged_total() const {
  double s = 0.0;
  for (const auto& slot : slots) s += slot.discharged_wh;
  return s;
}

double SlotActionHistogram::charged_share(int start_hour, int end_hour) const {
  const double total = charged_total();
  if (total <= 0.0) return 0.0;
  double in = 0.0;
  for (const auto& s : slots) {
    if (s.start_hour >= start_hour && s.end_hour <= end_hour) in += s.charged_wh;
  }
  return in / total;
}

double SlotActionHistogram::discharged_share(int start_hour, int end_hour) const {
  const double total = discharged_total();
  if (total <= 0.0) return 0.0;
  double in = 0.0;
  for (const auto& s : slots) {
    if (s.start_hour >= start_hour && s.end_hour <= end_hour) in += s.discharged_wh;
  }
  return in / total;
}

SlotActionHistogram slot_histogram(const EpisodeTrace& trace, const TariffSchedule& tariff, std::size_t epoch) {
  SlotActionHistogram h;
  h.epoch = epoch;
  for (const auto& s : tariff.slots()) {
    h.slots.push_back({s.start_hour, s.end_hour, tariff.base_price() + s.adder, 0.0, 0.0, 0});
  }
  for (const auto& row : trace.rows) {
    auto& slot = h.slots[tariff.slot_index(row.hour % kHoursPerDay)];
    slot.charged_wh += row.charge_wh;
    slot.discharged_wh += row.discharge_wh;
    if (row.charge_wh == 0.0 && row.discharge_wh == 0.0) ++slot.idle_hours;
  }
  return h;
}

std::vector<SlotActionHistogram> learning_progression(const std::vector<Checkpoint>& checkpoints,
                                                      const EnvConfig& env_config, std::size_t probe_day) {
  std::vector<SlotActionHistogram> out;
  for (const auto& cp : checkpoints) {
    const auto ev = evaluate(cp.params, env_config, {probe_day});
    out.push_back(slot_histogram(ev.traces.front(), env_config.tariff, cp.epoch));
  }
  return out;
}

const SweepRow* SweepResult::cell(double train_capacity, double eval_capacity) const {
  for (const auto& r : rows) {
    if (r.train_capacity_wh == train_capacity && r.eval_capacity_wh == eval_capacity) return &r;
  }
  return nullptr;
}

std::vector<SweepRow> SweepResult::diagonal() const {
  std::vector<SweepRow> out;
  for (const auto& r : rows) {
    if (r.train_capacity_wh == r.eval_capacity_wh) out.push_back(r);
  }
  return out;
}

SweepRow make_row(double train_capacity, double eval_capacity, double savings, double oracle_savings) {
  SweepRow r{train_capacity, eval_capacity, savings, oracle_savings, std::nullopt};
  if (oracle_savings > 0.0) r.fraction_of_oracle = savings / oracle_savings;
  return r;
}

namespace {

// Runs jobs[i]() for every i with at most `workers` threads; results land by index.
template <typename T, typename F>
std::vector<T> run_indexed(std::size_t count, std::size_t workers, F&& job) {
  std::vector<T> results(count);
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = job(i);
    return results;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= count || error) return;
        i = next++;
      }
      try {
        T r = job(i);
        std::lock_guard lock(mu);
        results[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

EnvConfig env_for(const SweepSpec& spec, double capacity, std::shared_ptr<const LoadProfile> load) {
  EnvConfig env = spec.env;
  env.battery = spec.battery.at(capacity);
  env.load = std::move(load);
  return env;
}

std::vector<double> oracle_savings(const std::vector<double>& capacities, const SweepSpec& spec,
                                   const DemandResponseConfig& dr) {
  return run_indexed<double>(capacities.size(), spec.jobs, [&](std::size_t i) {
    const auto plan = dp_optimal(spec.eval_load->hourly(), spec.env.tariff, spec.battery.at(capacities[i]), dr,
                                 spec.oracle);
    return plan.baseline_cost > 0.0 ? cost_saving(plan.total_cost, plan.baseline_cost) : 0.0;
  });
}

}  // namespace

CapacitySweep capacity_sweep(const std::vector<double>& capacities, const SweepSpec& spec) {
  if (capacities.empty()) throw ConfigError("capacity sweep needs at least one capacity");
  if (!spec.train_load || !spec.eval_load) throw ConfigError("capacity sweep needs train and eval load profiles");

  CapacitySweep sweep;
  sweep.agents = run_indexed<NetworkParams>(capacities.size(), spec.jobs, [&](std::size_t i) {
    return train(env_for(spec, capacities[i], spec.train_load), spec.agent).params;
  });
  const auto oracle = oracle_savings(capacities, spec, spec.env.dr);

  sweep.result.capacities = capacities;
  const std::size_t k = capacities.size();
  const auto cells = run_indexed<SweepRow>(k * k, spec.jobs, [&](std::size_t idx) -> SweepRow {
    const std::size_t ti = idx / k;
    const std::size_t ei = idx % k;
    if (!spec.cross && ti != ei) return {};
    const auto ev = evaluate(sweep.agents[ti], env_for(spec, capacities[ei], spec.eval_load));
    return make_row(capacities[ti], capacities[ei], ev.savings_pct, oracle[ei]);
  });
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    if (spec.cross || idx / k == idx % k) sweep.result.rows.push_back(cells[idx]);
  }
  return sweep;
}

DrComparison dr_comparison(const std::vector<double>& capacities, const SweepSpec& spec,
                           const DemandResponseConfig& dr_config, std::size_t fine_tune_epochs) {
  if (!dr_config.enabled) throw ConfigError("dr_comparison needs an enabled demand-response config");
  SweepSpec tod = spec;
  tod.env.dr = DemandResponseConfig{};
  tod.env.include_day_cumulative = true;
  auto base = capacity_sweep(capacities, tod);

  SweepSpec with_dr = tod;
  with_dr.env.dr = dr_config;
  AgentConfig tune = spec.agent;
  tune.epochs = fine_tune_epochs;
  const auto oracle = oracle_savings(capacities, with_dr, dr_config);

  DrComparison out;
  out.tod = base.result;
  out.tod_dr.capacities = capacities;
  out.tod_dr.rows = run_indexed<SweepRow>(capacities.size(), spec.jobs, [&](std::size_t i) {
    const auto tuned = fine_tune(base.agents[i], env_for(with_dr, capacities[i], with_dr.train_load), tune);
    const auto ev = evaluate(tuned.params, env_for(with_dr, capacities[i], with_dr.eval_load));
    return make_row(capacities[i], capacities[i], ev.savings_pct, oracle[i]);
  });

  std::vector<double> a, b;
  for (const auto& r : out.tod.diagonal()) a.push_back(r.savings_pct);
  for (const auto& r : out.tod_dr.rows) b.push_back(r.savings_pct);
  out.tod_flattening = find_flattening(a);
  out.tod_dr_flattening = find_flattening(b);
  return out;
}

std::vector<double> parse_capacities(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("invalid capacity list: '" + text + "'");
    }
    if (used != s.size() || !(v >= 0.0)) throw ConfigError("invalid capacity list: '" + text + "'");
    return v;
  };
  auto strip = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  };
  std::vector<double> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto step_pos = text.find("step");
    if (step_pos == std::string::npos || step_pos < dots) {
      throw ConfigError("range must read 'FIRST..LAST step STEP': '" + text + "'");
    }
    const double first = number(strip(text.substr(0, dots)));
    const double last = number(strip(text.substr(dots + 2, step_pos - dots - 2)));
    const double step = number(strip(text.substr(step_pos + 4)));
    if (!(step > 0.0) || last < first) throw ConfigError("invalid capacity range: '" + text + "'");
    const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(first + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = strip(item);
      if (!item.empty()) out.push_back(number(item));
    }
  }
  if (out.empty()) throw ConfigError("empty capacity list");
  if (!std::is_sorted(out.begin(), out.end())) throw ConfigError("capacities must be ascending");
  return out;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_sweep_rows(const std::vector<SweepRow>& rows, const fs::path& path, bool cross) {
  auto out = open_out(path);
  if (cross) {
    out << "train_capacity_wh,eval_capacity_wh,savings_pct,oracle_savings_pct,fraction_of_oracle\n";
  } else {
    out << "capacity_wh,savings_pct,oracle_savings_pct,fraction_of_oracle\n";
  }
  for (const auto& r : rows) {
    if (cross) out << format_number(r.train_capacity_wh) << ',';
    out << format_number(r.eval_capacity_wh) << ',' << format_number(r.savings_pct) << ','
        << format_number(r.oracle_savings_pct) << ','
        << (r.fraction_of_oracle ? format_number(*r.fraction_of_oracle) : std::string()) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json sweep_json(const SweepResult& sweep) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : sweep.diagonal()) {
    arr.push_back({{"capacity_wh", r.eval_capacity_wh},
                   {"savings_pct", r.savings_pct},
                   {"oracle_savings_pct", r.oracle_savings_pct},
                   {"fraction_of_oracle", r.fraction_of_oracle ? nlohmann::json(*r.fraction_of_oracle)
                                                               : nlohmann::json(nullptr)}});
  }
  return arr;
}

}  // namespace

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "hour,price,load_wh,action,battery_wh,grid_wh,reward\n";
  for (const auto& r : trace.rows) {
    out << r.hour << ',' << format_number(r.price) << ',' << format_number(r.load_wh) << ','
        << static_cast<int>(r.action) << ',' << format_number(r.battery_wh) << ',' << format_number(r.grid_wh)
        << ',' << format_number(r.reward) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_report(const Report& report, const std::string& output_dir) {
  const fs::path root(output_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + root.string() + ": " + ec.message());

  if (!report.traces.empty()) {
    fs::create_directories(root / "traces");
    for (const auto& [name, trace] : report.traces) write_trace_csv(trace, (root / "traces" / (name + ".csv")).string());
  }
  if (!report.histograms.empty()) {
    fs::create_directories(root / "histograms");
    for (const auto& [name, h] : report.histograms) {
      auto out = open_out(root / "histograms" / (name + ".csv"));
      out << "slot_start,slot_end,price,charged_wh,discharged_wh,idle_hours\n";
      for (const auto& s : h.slots) {
        out << s.start_hour << ',' << s.end_hour << ',' << format_number(s.price) << ','
            << format_number(s.charged_wh) << ',' << format_number(s.discharged_wh) << ',' << s.idle_hours << '\n';
      }
    }
  }

  nlohmann::json summary = report.summary;
  if (report.sweep) {
    write_sweep_rows(report.sweep->diagonal(), root / "sweep.csv", false);
    write_sweep_rows(report.sweep->rows, root / "cross_matrix.csv", true);
    summary["sweep"] = sweep_json(*report.sweep);
  }
  if (report.dr_sweep) {
    write_sweep_rows(report.dr_sweep->diagonal(), root / "sweep_dr.csv", false);
    summary["sweep_dr"] = sweep_json(*report.dr_sweep);
  }
  auto out = open_out(root / "summary.json");
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + (root / "summary.json").string());
}

}  // namespace storage_dqn
