#include <doctest.h>

#include <cmath>
#include <random>

#include "storage_dqn/environment.hpp"
#include "storage_dqn/errors.hpp"

using namespace storage_dqn;

namespace {

std::shared_ptr<const LoadProfile> constant_load(double wh, int days = 1) {
  return std::make_shared<const LoadProfile>(std::vector<double>(24 * days, wh), LoadSource::Synthetic);
}

EnvConfig table1_env(double load_wh = 300.0) {
  EnvConfig env;
  env.load = constant_load(load_wh);
  return env;
}

}  // namespace

TEST_CASE("apply_action examples") {
  BatteryConfig b;  // 900 Wh, 300 W, SoC [0, 1]
  auto r = apply_action(900, b, Action::ChargePlusGrid, 200);
  CHECK(r.new_energy == 900);
  CHECK(r.grid_draw == 200);

  r = apply_action(600, b, Action::DischargePlusGrid, 500);
  CHECK(r.new_energy == 300);
  CHECK(r.grid_draw == 200);

  r = apply_action(100, b, Action::DischargePlusGrid, 50);
  CHECK(r.new_energy == 50);
  CHECK(r.grid_draw == 0);

  r = apply_action(100, b, Action::GridOnly, 70);
  CHECK(r.new_energy == 100);
  CHECK(r.grid_draw == 70);

  BatteryConfig floor = b;
  floor.soc_min = 0.1;
  r = apply_action(120, floor, Action::DischargePlusGrid, 500);
  CHECK(r.new_energy == 90);
  CHECK(r.grid_draw == 470);
}

TEST_CASE("penalty examples") {
  DemandResponseConfig dr;
  CHECK(penalty(5000, 0, dr) == 0.0);
  dr.enabled = true;
  CHECK(penalty(100, 650, dr) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(penalty(100, 800, dr) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(penalty(100, 0, dr) == 0.0);
  dr.mode = DemandResponseMode::PerInterval;
  CHECK(penalty(900, 5000, dr) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(penalty(700, 0, dr) == 0.0);
}

TEST_CASE("reward examples") {
  CHECK(reward(3, 500, 0) == -1.5);
  CHECK(reward(1, 0, 0) == 0.0);
  CHECK(reward(5, 1000, 0.2) == doctest::Approx(-5.2).epsilon(1e-15));
}

TEST_CASE("baseline cost and savings") {
  const std::vector<double> day(24, 300.0);
  DemandResponseConfig off;
  CHECK(baseline_cost(day, builtin_schedule("table1"), off) == doctest::Approx(14.4).epsilon(1e-15));
  // 0.3 * (8*4.25 + 3*5 + 3*5.5 + 6*5 + 4*6) = 0.3 * 119.5
  CHECK(baseline_cost(day, builtin_schedule("tata"), off) == doctest::Approx(35.85).epsilon(1e-15));
  CHECK(baseline_cost(std::vector<double>(24, 0.0), builtin_schedule("tata"), off) == 0.0);

  CHECK(cost_saving(14.4, 14.4) == 0.0);
  CHECK(cost_saving(0.88 * 50, 50) == doctest::Approx(12.0));
  CHECK(cost_saving(0, 7) == 100.0);
  CHECK_THROWS_AS(cost_saving(1, 0), DomainError);

  DemandResponseConfig on;
  on.enabled = true;
  // 7200 Wh a day, 6500 over the limit
  CHECK(baseline_cost(day, builtin_schedule("table1"), on) == doctest::Approx(14.4 + 13.0));
}

TEST_CASE("reset") {
  auto env_cfg = table1_env();
  Environment env(env_cfg);
  const auto& obs = env.reset(0);
  CHECK(obs.size() == 26);
  CHECK(obs[24] == 0.0);
  CHECK(obs[25] == 300.0);

  env_cfg.battery.capacity_wh = 20000;
  env_cfg.battery.soc_min = 0.1;
  env_cfg.battery.soc_max = 0.9;
  Environment big(env_cfg);
  CHECK(big.reset(0)[24] == doctest::Approx(0.1));
  CHECK(big.energy() == 2000.0);
  CHECK_THROWS_AS(big.reset(1), DomainError);
}

TEST_CASE("observation layout") {
  auto cfg = table1_env();
  cfg.include_hour = true;
  cfg.dr.enabled = true;
  Environment env(cfg);
  CHECK(env.observation_size() == 28);
  env.reset(0);
  for (int t = 0; t < 5; ++t) env.step(Action::ChargePlusGrid);
  const auto& obs = env.observation();
  for (int i = 0; i < 24; ++i) CHECK(obs[i] == cfg.tariff.price_at((5 + i) % 24));
  CHECK(obs[24] == doctest::Approx(900.0 / 900.0));
  CHECK(obs[26] == doctest::Approx(5.0 / 24.0));
  CHECK(obs[27] == 5 * 300.0 + 3 * 300.0);

  auto fc = table1_env();
  fc.horizon_hours = 3;
  fc.price_forecast = std::vector<double>(24, 0.0);
  for (int i = 0; i < 24; ++i) fc.price_forecast[i] = 10.0 + i;
  Environment with_forecast(fc);
  const auto& o = with_forecast.reset(0);
  CHECK(o.size() == 5);
  CHECK(o[0] == 10.0);
  CHECK(o[2] == 12.0);
}

TEST_CASE("step semantics") {
  Environment env(table1_env(0.0));
  env.reset(0);
  const auto first = env.step(Action::ChargePlusGrid);
  CHECK(first.reward == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(first.grid_draw == 300.0);

  Environment e2(table1_env());
  e2.reset(0);
  double total = 0.0;
  for (int t = 0; t < 24; ++t) {
    const auto out = e2.step(Action::GridOnly);
    total -= out.reward;
    CHECK(out.done == (t == 23));
  }
  CHECK(total == doctest::Approx(14.4).epsilon(1e-14));
  CHECK(e2.episode_cost() == 14.4);
  CHECK_THROWS_AS(e2.step(Action::GridOnly), UsageError);
}

TEST_CASE("random action sequences respect bounds and conserve energy") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> load_dist(0.0, 1000.0);
  std::uniform_int_distribution<int> action_dist(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> loads(24);
    for (auto& l : loads) l = std::round(load_dist(rng));
    EnvConfig cfg;
    cfg.tariff = builtin_schedule(trial % 2 ? "tata" : "table1");
    cfg.load = std::make_shared<const LoadProfile>(loads, LoadSource::Synthetic);
    cfg.battery.capacity_wh = 500.0 + 100.0 * (trial % 7);
    cfg.battery.soc_min = 0.1;
    cfg.battery.soc_max = 0.9;
    Environment env(cfg);
    env.reset(0);
    double cost = 0.0;
    double prev = env.energy();
    for (int t = 0; t < 24; ++t) {
      const auto out = env.step(static_cast<Action>(action_dist(rng)));
      CHECK(out.energy_after >= cfg.battery.floor_wh() - 1e-9);
      CHECK(out.energy_after <= cfg.battery.ceiling_wh() + 1e-9);
      CHECK(out.grid_draw >= 0.0);
      CHECK(out.grid_draw + out.discharge == doctest::Approx(out.load + out.charge));
      CHECK((out.charge == 0.0 || out.discharge == 0.0));
      CHECK(out.energy_after - prev == doctest::Approx(out.charge - out.discharge));
      prev = out.energy_after;
      cost += out.price * out.grid_draw / 1000.0;
    }
    CHECK(env.episode_cost() == doctest::Approx(cost).epsilon(1e-12));
  }
}

TEST_CASE("zero-capacity battery is exactly the baseline") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> load_dist(0, 1500), action_dist(0, 2);
  for (const char* name : {"table1", "tata"}) {
    std::vector<double> loads(24);
    for (auto& l : loads) l = load_dist(rng);
    EnvConfig cfg;
    cfg.tariff = builtin_schedule(name);
    cfg.load = std::make_shared<const LoadProfile>(loads, LoadSource::Synthetic);
    cfg.battery.capacity_wh = 0.0;
    cfg.dr.enabled = true;
    Environment env(cfg);
    env.reset(0);
    while (!env.done()) env.step(static_cast<Action>(action_dist(rng)));
    CHECK(env.episode_cost() == baseline_cost(loads, cfg.tariff, cfg.dr));
  }
}

TEST_CASE("battery config checks") {
  BatteryConfig b;
  b.soc_min = 0.5;
  b.soc_max = 0.5;
  CHECK_THROWS_AS(b.check(), ConfigError);
  b = {};
  b.capacity_wh = -1;
  CHECK_THROWS_AS(b.check(), ConfigError);
  EnvConfig cfg;
  cfg.load = constant_load(1);
  cfg.horizon_hours = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("action names and indices") {
  CHECK(static_cast<int>(Action::GridOnly) == 0);
  CHECK(static_cast<int>(Action::DischargePlusGrid) == 1);
  CHECK(static_cast<int>(Action::ChargePlusGrid) == 2);
  CHECK(action_from_index(2) == Action::ChargePlusGrid);
  CHECK_THROWS_AS(action_from_index(3), DomainError);
}
