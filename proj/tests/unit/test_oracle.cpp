#include <doctest.h>

#include <random>

#include "../support/reference.hpp"
#include "storage_dqn/errors.hpp"
#include "storage_dqn/oracle.hpp"

using namespace storage_dqn;
using storage_dqn::testing::exhaustive_cost;
using storage_dqn::testing::reachable_state_cost;

namespace {

std::vector<double> random_loads(std::mt19937_64& rng, std::size_t n, int hi = 1000) {
  std::uniform_int_distribution<int> d(0, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("zero capacity is the baseline") {
  std::mt19937_64 rng(1);
  const auto load = random_loads(rng, 48);
  BatteryConfig b;
  b.capacity_wh = 0;
  for (const char* name : {"table1", "tata"}) {
    const auto plan = dp_optimal(load, builtin_schedule(name), b, DemandResponseConfig{});
    CHECK(plan.total_cost == plan.baseline_cost);
    for (Action a : plan.actions) CHECK(a == Action::GridOnly);
  }
}

TEST_CASE("table1 constant load") {
  const std::vector<double> load(24, 300.0);
  const auto tariff = builtin_schedule("table1");
  const auto plan = dp_optimal(load, tariff, BatteryConfig{}, DemandResponseConfig{});
  CHECK(plan.baseline_cost == doctest::Approx(14.4).epsilon(1e-15));
  CHECK(plan.total_cost < plan.baseline_cost);
  CHECK(plan.total_cost == reachable_state_cost(load, tariff, BatteryConfig{}, DemandResponseConfig{}));
  // 900 Wh bought at 1 instead of 3
  CHECK(plan.total_cost == doctest::Approx(14.4 - 1.8).epsilon(1e-15));
  for (std::size_t t = 0; t < 24; ++t) {
    if (plan.actions[t] == Action::ChargePlusGrid) CHECK(t < 8);
    if (plan.actions[t] == Action::DischargePlusGrid) CHECK((t >= 8 && t < 16));
  }
}

TEST_CASE("flat tariff gives no savings") {
  std::mt19937_64 rng(2);
  const TariffSchedule flat({{0, 24, 0.0}}, 4.0);
  const auto load = random_loads(rng, 24);
  const auto plan = dp_optimal(load, flat, BatteryConfig{}, DemandResponseConfig{});
  CHECK(cost_saving(plan.total_cost, plan.baseline_cost) == 0.0);
}

TEST_CASE("brute force examples") {
  BatteryConfig charged;
  charged.initial_frac = 1.0;
  const TariffSchedule tariff({{0, 24, 0.0}}, 9.0);
  const std::vector<double> one{200};
  CHECK(brute_force_optimal(one, tariff, charged, {}).actions[0] == Action::DischargePlusGrid);

  const std::vector<double> zeros(6, 0.0);
  const auto plan = brute_force_optimal(zeros, builtin_schedule("table1"), BatteryConfig{}, {});
  CHECK(plan.total_cost == 0.0);
  for (Action a : plan.actions) CHECK(a == Action::GridOnly);

  CHECK_THROWS_AS(brute_force_optimal(std::vector<double>(13, 1.0), tariff, charged, {}), CapacityError);
}

TEST_CASE("dp equals brute force on random short instances") {
  std::mt19937_64 rng(7);
  const char* tariffs[] = {"table1", "tata"};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 6 + trial % 4;  // 6..9 hours
    const auto load = random_loads(rng, T);
    BatteryConfig b;
    b.capacity_wh = 300 + 100 * (trial % 10);
    b.max_charge_w = 100 + 50 * (trial % 5);
    b.max_discharge_w = 150 + 50 * (trial % 4);
    b.soc_min = trial % 2 ? 0.1 : 0.0;
    b.soc_max = trial % 3 ? 0.9 : 1.0;
    DemandResponseConfig dr;
    dr.enabled = trial % 3 != 0;
    dr.mode = trial % 2 ? DemandResponseMode::PerInterval : DemandResponseMode::DailyCumulative;
    dr.limit_wh = trial % 2 ? 400 : 2500;
    const auto tariff = builtin_schedule(tariffs[trial % 2]);
    const auto dp = dp_optimal(load, tariff, b, dr);
    const auto bf = brute_force_optimal(load, tariff, b, dr);
    CHECK(dp.total_cost == bf.total_cost);
    CHECK(bf.total_cost == exhaustive_cost(load, tariff, b, dr));
  }
}

TEST_CASE("dp equals the reachable-state search over whole days") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto load = random_loads(rng, 24, 12);
    for (auto& x : load) x *= 50;  // coarse loads keep the tracked day totals few
    BatteryConfig b;
    b.capacity_wh = 900;
    DemandResponseConfig dr;
    dr.enabled = trial % 2 == 1;
    dr.limit_wh = 5000;
    const auto tariff = builtin_schedule(trial % 3 ? "table1" : "tata");
    OracleOptions coarse;
    coarse.quantum_wh = 50;  // every reachable energy and day total is a multiple of 50
    CHECK(dp_optimal(load, tariff, b, dr, coarse).total_cost == reachable_state_cost(load, tariff, b, dr));
  }
}

TEST_CASE("plan replay and optimality") {
  std::mt19937_64 rng(9);
  const auto load = random_loads(rng, 72);
  const auto tariff = builtin_schedule("tata");
  BatteryConfig b;
  b.capacity_wh = 2000;
  b.max_charge_w = 700;
  b.max_discharge_w = 700;
  DemandResponseConfig dr;
  dr.enabled = true;
  dr.mode = DemandResponseMode::PerInterval;
  dr.limit_wh = 600;
  const auto plan = dp_optimal(load, tariff, b, dr);
  const auto again = replay_plan(plan.actions, load, tariff, b, dr);
  CHECK(std::abs(again.total_cost - plan.total_cost) <= 1e-9);
  CHECK(plan.grid_draw.size() == 72);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int i = 0; i < 200; ++i) {
    std::vector<Action> random(72);
    for (auto& a : random) a = static_cast<Action>(pick(rng));
    CHECK(plan.total_cost <= replay_plan(random, load, tariff, b, dr).total_cost);
  }
  const auto rerun = dp_optimal(load, tariff, b, dr);
  CHECK(rerun.actions == plan.actions);
}

TEST_CASE("state budget") {
  OracleOptions tight;
  tight.state_budget = 1000;
  const std::vector<double> load(24, 100.0);
  CHECK_THROWS_AS(dp_optimal(load, builtin_schedule("table1"), BatteryConfig{}, {}, tight), CapacityError);
  tight.quantum_wh = 100;
  CHECK_NOTHROW(dp_optimal(load, builtin_schedule("table1"), BatteryConfig{}, {}, tight));
}

TEST_CASE("savings curve") {
  const std::vector<double> load(24, 300.0);
  const std::vector<double> caps{0, 900, 1800};
  const auto curve = savings_curve(caps, load, builtin_schedule("table1"), {});
  CHECK(curve[0].savings_pct == 0.0);
  CHECK(curve[1].savings_pct > 0.0);
  const std::vector<double> unsorted{900, 0};
  CHECK_THROWS_AS(savings_curve(unsorted, load, builtin_schedule("table1"), {}), DomainError);
}

TEST_CASE("rate-scaled batteries are not monotone in capacity") {
  // A charge always moves min(rate, headroom); with rate tied to capacity a large
  // battery cannot buy a small amount, so bigger is not always better.
  const std::vector<double> load(24, 300.0);
  const std::vector<double> caps{5000, 10000, 15000};
  const auto curve = savings_curve(caps, load, builtin_schedule("tata"), {});
  CHECK(curve[1].savings_pct > 0.0);
  CHECK(curve[2].savings_pct < curve[1].savings_pct);
}

TEST_CASE("find_flattening") {
  CHECK(find_flattening(std::vector<double>{1, 5, 8, 8.3, 8.4}) == 2);
  CHECK(!find_flattening(std::vector<double>{1, 2, 3}));
  CHECK(find_flattening(std::vector<double>{1, 2, 3}, 1.5) == 0);
  CHECK(!find_flattening(std::vector<double>{4}));
}
