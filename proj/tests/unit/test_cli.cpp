#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "storage_dqn/analysis.hpp"
#include "storage_dqn/cli.hpp"
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
  auto dir = fs::temp_directory_path() / ("storage_dqn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "storage-dqn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Small enough to train in well under a second.
std::vector<std::string> tiny_sets() {
  return {"--set", "data.synthetic.days=4", "--set", "data.train_days=2", "--set", "data.test_days=2",
          "--set", "agent.epochs=2", "--set", "agent.checkpoint_every=1", "--set", "agent.batch_size=8",
          "--set", "agent.warmup_transitions=16", "--set", "network.trunk=8", "--set", "network.stream=4"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("config round trip") {
  RunConfig c;
  apply_override(c, "tariff.builtin=tata");
  apply_override(c, "battery.capacity_wh=1234.5");
  apply_override(c, "agent.learning_rate=0.001");
  apply_override(c, "network.trunk=32,16");
  apply_override(c, "dr.enabled=true");
  apply_override(c, "dr.mode=per_interval");
  apply_override(c, "tariff.slot=0,12,1");
  apply_override(c, "tariff.slot=12,24,2");
  const auto text = c.to_kv().to_string();
  const auto back = RunConfig::from_kv(KeyValueFile::parse(text));
  CHECK(back.to_kv().to_string() == text);
  CHECK(back.battery.capacity_wh == 1234.5);
  CHECK(back.agent.layers.trunk_sizes == std::vector<int>{32, 16});
  CHECK(back.tariff_slots.size() == 2);
  CHECK(back.tariff().price_at(13) == 2.0);
}

TEST_CASE("every key survives a round trip of its own value") {
  const RunConfig c;
  for (const auto& k : config_keys()) {
    RunConfig d;
    k.set(d, k.get(c));
    CHECK_MESSAGE(k.get(d) == k.get(c), k.key);
  }
}

TEST_CASE("bad overrides") {
  RunConfig c;
  CHECK_THROWS_AS(apply_override(c, "agent.nonsense=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "agent.discount"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "agent.discount=abc"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "env.include_day_cumulative=maybe"), ConfigError);
}

TEST_CASE("tariff precedence") {
  RunConfig c;
  apply_override(c, "tariff.builtin=tata");
  CHECK(c.tariff().price_at(19) == 6.0);
  apply_override(c, "tariff.slot=0,24,7");
  CHECK(c.tariff().price_at(19) == 7.0);
}

TEST_CASE("help and usage") {
  const auto help = cli({"train", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("agent.discount") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"train", "--set", "agent.nonsense=1"}).code == 2);
  CHECK(cli({"gen-data", "--days", "0"}).code == 2);
  const auto missing = cli({"oracle", "--set", "data.csv=/nonexistent/load.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/load.csv") != std::string::npos);
}

TEST_CASE("gen-data is deterministic") {
  const auto dir = scratch("gen");
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  REQUIRE(cli({"gen-data", "--days", "3", "--seed", "5", "--out", a}).code == 0);
  REQUIRE(cli({"gen-data", "--days", "3", "--seed", "5", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(load_csv(a).day_count() == 3);
  fs::remove_all(dir);
}

TEST_CASE("train, eval, explain") {
  const auto dir = scratch("train");
  const auto run = (dir / "run").string();
  REQUIRE(cli(with({"train", "--out", run}, tiny_sets())).code == 0);
  const auto manifest = nlohmann::json::parse(slurp(fs::path(run) / "manifest.json"));
  const AgentConfig defaults;
  CHECK(manifest["hyperparameters"]["discount"] == defaults.discount);
  CHECK(manifest["hyperparameters"]["learning_rate"] == defaults.learning_rate);
  CHECK(manifest["hyperparameters"]["replay_capacity"] == defaults.replay_capacity);
  CHECK(manifest["hyperparameters"]["target_update_every"] == defaults.target_update_every);
  CHECK(manifest["hyperparameters"]["batch_size"] == 8);
  CHECK(manifest["checkpoints"].size() == 3);
  CHECK(manifest["train_records_sha256"] == sha256_hex(slurp(fs::path(run) / "train_records.csv")));
  for (const auto& cp : manifest["checkpoints"]) {
    CHECK(cp["sha256"] == sha256_hex(slurp(fs::path(run) / cp["file"].get<std::string>())));
  }

  const auto ckpt = (fs::path(run) / "checkpoints" / "epoch_0002.ckpt").string();
  const auto ev = (dir / "eval").string();
  REQUIRE(cli(with({"eval", "--checkpoint", ckpt, "--out", ev, "--set", "battery.capacity_wh=0"}, tiny_sets()))
              .code == 0);
  const auto summary = nlohmann::json::parse(slurp(fs::path(ev) / "summary.json"));
  CHECK(summary["savings_pct"] == 0.0);
  CHECK(summary["agent_cost"] == summary["baseline_cost"]);

  // a DR run observes one more field, so the checkpoint no longer fits
  const auto mismatch = cli(with({"eval", "--checkpoint", ckpt, "--out", ev, "--set", "dr.enabled=true"}, tiny_sets()));
  CHECK(mismatch.code == 2);

  const auto ex = (dir / "explain").string();
  REQUIRE(cli({"explain", "--run", run, "--out", ex}).code == 0);
  CHECK(fs::exists(fs::path(ex) / "histograms" / "epoch_0000.csv"));
  CHECK(fs::exists(fs::path(ex) / "histograms" / "epoch_0002.csv"));
  fs::remove_all(dir);
}

TEST_CASE("oracle command") {
  const auto dir = scratch("oracle");
  REQUIRE(cli({"oracle", "--out", dir.string(), "--set", "data.synthetic.days=2", "--set", "data.train_days=1",
               "--set", "data.test_days=1"})
              .code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["savings_pct"].get<double>() > 0.0);
  CHECK(summary["optimal_cost"].get<double>() < summary["baseline_cost"].get<double>());
  fs::remove_all(dir);
}

TEST_CASE("bundled profile and example configs") {
  const fs::path root(STORAGE_DQN_SOURCE_DIR);
  const auto bundled = load_csv((root / "data" / "synthetic_default.csv").string());
  CHECK(bundled.digest() == generate(SyntheticSpec{}).digest());
  for (const char* name : {"table1.conf", "tata_sweep.conf", "dr_sweep.conf"}) {
    const auto config = RunConfig::from_kv(KeyValueFile::load((root / "configs" / name).string()));
    CHECK_NOTHROW(config.agent_config().check());
    CHECK_NOTHROW(parse_capacities(config.sweep_capacities));
  }
}
