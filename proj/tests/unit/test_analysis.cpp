#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "storage_dqn/analysis.hpp"
#include "storage_dqn/errors.hpp"

using namespace storage_dqn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("storage_dqn_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

AgentConfig tiny_agent() {
  AgentConfig a;
  a.layers.trunk_sizes = {8};
  a.layers.stream_sizes = {4};
  a.batch_size = 8;
  a.replay_capacity = 128;
  a.warmup_transitions = 16;
  a.epochs = 2;
  a.checkpoint_every = 1;
  return a;
}

SweepSpec tiny_sweep() {
  SyntheticSpec s;
  s.days = 4;
  auto [train_part, test_part] = split(generate(s), 2, 2);
  SweepSpec spec;
  spec.train_load = std::make_shared<const LoadProfile>(train_part);
  spec.eval_load = std::make_shared<const LoadProfile>(test_part);
  spec.env.tariff = builtin_schedule("tata");
  spec.agent = tiny_agent();
  spec.oracle.quantum_wh = 10;
  return spec;
}

}  // namespace

TEST_CASE("evaluation cost matches the trace rows") {
  SyntheticSpec s;
  s.days = 3;
  EnvConfig env;
  env.load = std::make_shared<const LoadProfile>(generate(s));
  const auto params = init_network(LayerSpec{}, static_cast<int>(env.observation_size()), 3);
  const auto ev = evaluate(params, env);
  REQUIRE(ev.traces.size() == 3);
  double total = 0.0;
  for (const auto& trace : ev.traces) {
    double cost = 0.0;
    double energy = trace.initial_battery_wh;
    for (const auto& r : trace.rows) {
      cost += r.price * r.grid_wh / 1000.0;
      CHECK(r.grid_wh == doctest::Approx(r.load_wh + r.charge_wh - r.discharge_wh));
      energy += r.charge_wh - r.discharge_wh;
      CHECK(r.battery_wh == doctest::Approx(energy));
    }
    CHECK(trace.cost == doctest::Approx(cost).epsilon(1e-12));
    total += cost;
  }
  CHECK(ev.savings_pct == doctest::Approx(100.0 * (ev.baseline_cost - total) / ev.baseline_cost));
}

TEST_CASE("zero capacity evaluates to zero savings") {
  SyntheticSpec s;
  s.days = 2;
  EnvConfig env;
  env.battery.capacity_wh = 0;
  env.load = std::make_shared<const LoadProfile>(generate(s));
  const auto params = init_network(LayerSpec{}, static_cast<int>(env.observation_size()), 5);
  const auto ev = evaluate(params, env);
  CHECK(ev.savings_pct == 0.0);
  CHECK(ev.cost == ev.baseline_cost);
}

TEST_CASE("slot histogram conserves energy") {
  const std::vector<double> load(24, 300.0);
  const auto tariff = builtin_schedule("tata");
  BatteryConfig b;
  b.capacity_wh = 2000;
  b.max_charge_w = 700;
  b.max_discharge_w = 700;
  const auto plan = dp_optimal(load, tariff, b, {});
  const auto traces = traces_from_plan(plan, load, tariff, b, {});
  REQUIRE(traces.size() == 1);
  CHECK(traces[0].cost == doctest::Approx(plan.total_cost).epsilon(1e-12));
  const auto h = slot_histogram(traces[0], tariff);
  double charged = 0.0, discharged = 0.0;
  int idle = 0;
  for (const auto& r : traces[0].rows) {
    charged += r.charge_wh;
    discharged += r.discharge_wh;
    idle += r.action == Action::GridOnly;
  }
  CHECK(h.charged_total() == doctest::Approx(charged));
  CHECK(h.discharged_total() == doctest::Approx(discharged));
  int idle_hist = 0;
  for (const auto& s : h.slots) idle_hist += s.idle_hours;
  CHECK(idle_hist == idle);
  CHECK(h.charged_share(0, 24) == doctest::Approx(charged > 0 ? 1.0 : 0.0));
}

TEST_CASE("parse_capacities") {
  CHECK(parse_capacities("5000..30000 step 5000") == std::vector<double>{5000, 10000, 15000, 20000, 25000, 30000});
  CHECK(parse_capacities("0, 900,1800") == std::vector<double>{0, 900, 1800});
  CHECK_THROWS_AS(parse_capacities("10..5 step 1"), ConfigError);
  CHECK_THROWS_AS(parse_capacities("1..5 step 0"), ConfigError);
  CHECK_THROWS_AS(parse_capacities("abc"), ConfigError);
}

TEST_CASE("sweep report layout and reproducibility") {
  auto spec = tiny_sweep();
  const std::vector<double> caps{0, 1000};
  const auto sweep = capacity_sweep(caps, spec);
  REQUIRE(sweep.result.rows.size() == 4);
  CHECK(sweep.result.diagonal().size() == 2);
  const auto* zero = sweep.result.cell(0, 0);
  REQUIRE(zero);
  CHECK(zero->savings_pct == 0.0);
  CHECK(zero->oracle_savings_pct == 0.0);
  CHECK(!zero->fraction_of_oracle);
  CHECK(sweep.result.cell(1000, 1000)->oracle_savings_pct > 0.0);

  spec.jobs = 3;
  const auto parallel = capacity_sweep(caps, spec);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(parallel.result.rows[i].savings_pct == sweep.result.rows[i].savings_pct);
    CHECK(parallel.result.rows[i].oracle_savings_pct == sweep.result.rows[i].oracle_savings_pct);
  }

  Report report;
  report.summary["note"] = "x";
  report.sweep = sweep.result;
  const auto a = scratch("report_a");
  const auto b = scratch("report_b");
  emit_report(report, a.string());
  emit_report(report, b.string());
  for (const char* f : {"sweep.csv", "cross_matrix.csv", "summary.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto cross = read_csv(a / "cross_matrix.csv");
  CHECK(cross.size() == 1 + 4);
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(summary.dump().find("fraction_of_oracle") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("trace csv round trip") {
  const std::vector<double> load(24, 300.0);
  const auto tariff = builtin_schedule("table1");
  const auto plan = dp_optimal(load, tariff, BatteryConfig{}, {});
  const auto trace = traces_from_plan(plan, load, tariff, BatteryConfig{}, {})[0];
  const auto dir = scratch("trace");
  fs::create_directories(dir);
  write_trace_csv(trace, (dir / "t.csv").string());
  const auto rows = read_csv(dir / "t.csv");
  REQUIRE(rows.size() == 25);
  CHECK(rows[0] == std::vector<std::string>{"hour", "price", "load_wh", "action", "battery_wh", "grid_wh", "reward"});
  double cost = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) cost += std::stod(rows[i][1]) * std::stod(rows[i][5]) / 1000.0;
  CHECK(cost == doctest::Approx(plan.total_cost).epsilon(1e-9));
  CHECK(cost_saving(cost, plan.baseline_cost) == doctest::Approx(12.5));
  fs::remove_all(dir);
}

TEST_CASE("dr comparison keeps shapes compatible") {
  auto spec = tiny_sweep();
  DemandResponseConfig dr;
  dr.enabled = true;
  dr.limit_wh = 4000;
  const std::vector<double> caps{1000, 2000};
  const auto cmp = dr_comparison(caps, spec, dr, 1);
  CHECK(cmp.tod.rows.size() == 4);
  CHECK(cmp.tod_dr.rows.size() == 2);
}
