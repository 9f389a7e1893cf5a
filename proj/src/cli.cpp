#include "storage_dqn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "storage_dqn/analysis.hpp"
#include "storage_dqn/errors.hpp"

namespace storage_dqn {

namespace fs = std::filesystem;

namespace {

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
  return buf;
}

std::string day_name(std::size_t day) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "day_%03zu", day);
  return buf;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

nlohmann::json config_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  const KeyValueFile kv = config.to_kv();
  for (const auto& [key, value] : kv.entries()) {
    if (key == "tariff.slot")
      j[key].push_back(value);
    else
      j[key] = value;
  }
  return j;
}

void write_records(const std::vector<TrainRecord>& records, const fs::path& path) {
  auto out = open_for_write(path);
  out << "epoch,total_reward,cost,savings_pct,mean_loss,epsilon\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << format_number(r.total_reward) << ',' << format_number(r.cost) << ','
        << format_number(r.savings_pct) << ',' << format_number(r.mean_loss) << ',' << format_number(r.epsilon)
        << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

double oracle_savings_over(std::span<const double> load, const EnvConfig& env, const OracleOptions& options) {
  const auto plan = dp_optimal(load, env.tariff, env.battery, env.dr, options);
  return plan.baseline_cost > 0.0 ? cost_saving(plan.total_cost, plan.baseline_cost) : 0.0;
}

DispatchPlan run_oracle(std::span<const double> load, const EnvConfig& env, const OracleOptions& options) {
  try {
    return dp_optimal(load, env.tariff, env.battery, env.dr, options);
  } catch (const CapacityError& e) {
    throw CapacityError(std::string(e.what()) + "; try a coarser oracle.quantum_wh (currently " +
                        format_exact(options.quantum_wh) + ")");
  }
}

}  // namespace

std::string resolve_output_dir(const RunConfig& config) {
  fs::path dir(config.output_dir);
  if (const char* root = std::getenv("STORAGE_DQN_OUT"); root && *root && dir.is_relative()) dir = fs::path(root) / dir;
  return dir.string();
}

void cmd_train(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  auto [train_profile, eval_profile] = config.split_profiles();
  auto train_load = std::make_shared<const LoadProfile>(train_profile);
  const EnvConfig env = config.env_config(train_load);
  env.check();
  const AgentConfig agent = config.agent_config();
  agent.check();

  const fs::path root(out_dir);
  fs::create_directories(root / "checkpoints");
  log << "training " << agent.epochs << " epochs on " << train_load->day_count() << " days\n";
  const TrainResult result = train(env, agent);

  nlohmann::json checkpoints = nlohmann::json::array();
  for (const auto& c : result.checkpoints) {
    const fs::path file = root / "checkpoints" / (epoch_name(c.epoch) + ".ckpt");
    save_checkpoint(c.params, file.string());
    checkpoints.push_back({{"epoch", c.epoch},
                           {"file", fs::relative(file, root).generic_string()},
                           {"sha256", file_digest(file)}});
  }
  write_records(result.records, root / "train_records.csv");
  {
    auto out = open_for_write(root / "config.conf");
    out << config.to_kv().to_string();
  }

  nlohmann::json manifest;
  manifest["config"] = config_json(config);
  manifest["seed"] = config.seed;
  manifest["hyperparameters"] = {{"batch_size", agent.batch_size},
                                 {"replay_capacity", agent.replay_capacity},
                                 {"discount", agent.discount},
                                 {"learning_rate", agent.learning_rate},
                                 {"epsilon_initial", agent.epsilon_initial},
                                 {"epsilon_final", agent.epsilon_final},
                                 {"target_update_every", agent.target_update_every},
                                 {"epochs", agent.epochs}};
  const LoadProfile full = config.load_profile();
  manifest["data"] = {{"source", config.data_csv.empty() ? "synthetic" : "csv"},
                      {"digest", full.digest()},
                      {"train_digest", train_load->digest()},
                      {"train_days", train_load->day_count()}};
  manifest["observation_size"] = env.observation_size();
  manifest["checkpoints"] = checkpoints;
  manifest["train_records_sha256"] = file_digest(root / "train_records.csv");
  auto out = open_for_write(root / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!result.records.empty())
    log << "final epoch savings " << format_number(result.records.back().savings_pct) << "%\n";
  log << "wrote " << out_dir << '\n';
}

void cmd_eval(const RunConfig& config, const std::string& checkpoint, const std::string& out_dir,
              std::ostream& log) {
  if (!fs::exists(checkpoint)) throw DataError("checkpoint not found: " + checkpoint);
  const NetworkParams params = load_checkpoint(checkpoint);
  auto eval_load = std::make_shared<const LoadProfile>(config.split_profiles().second);
  const EnvConfig env = config.env_config(eval_load);
  env.check();
  const Evaluation ev = evaluate(params, env);
  const double oracle = oracle_savings_over(eval_load->hourly(), env, config.oracle);

  Report report;
  for (const auto& t : ev.traces) report.traces.emplace_back(day_name(t.day), t);
  report.summary = {{"checkpoint", checkpoint},
                    {"days", eval_load->day_count()},
                    {"baseline_cost", ev.baseline_cost},
                    {"agent_cost", ev.cost},
                    {"savings_pct", ev.savings_pct},
                    {"oracle_savings_pct", oracle}};
  if (oracle > 0.0) report.summary["fraction_of_oracle"] = ev.savings_pct / oracle;
  emit_report(report, out_dir);
  log << "savings " << format_number(ev.savings_pct) << "% (oracle " << format_number(oracle) << "%)\n";
}

void cmd_sweep(const RunConfig& config, std::size_t jobs, const std::string& out_dir, std::ostream& log) {
  const auto capacities = parse_capacities(config.sweep_capacities);
  auto [train_profile, eval_profile] = config.split_profiles();
  SweepSpec spec;
  spec.train_load = std::make_shared<const LoadProfile>(std::move(train_profile));
  spec.eval_load = std::make_shared<const LoadProfile>(std::move(eval_profile));
  spec.env = config.env_config(spec.train_load);
  spec.agent = config.agent_config();
  spec.agent.check();
  spec.battery = config.sweep_battery;
  spec.oracle = config.oracle;
  spec.jobs = std::max<std::size_t>(1, jobs);
  spec.cross = config.sweep_cross;

  log << "sweeping " << capacities.size() << " capacities with " << spec.jobs << " job(s)\n";
  Report report;
  report.summary["capacities_wh"] = capacities;
  if (config.dr.enabled) {
    const DrComparison cmp = dr_comparison(capacities, spec, config.dr, config.fine_tune_epochs);
    report.sweep = cmp.tod;
    report.dr_sweep = cmp.tod_dr;
    auto flat = [&](const std::optional<std::size_t>& i) -> nlohmann::json {
      return i ? nlohmann::json(capacities[*i]) : nlohmann::json(nullptr);
    };
    report.summary["flattening_capacity_wh"] = flat(cmp.tod_flattening);
    report.summary["dr_flattening_capacity_wh"] = flat(cmp.tod_dr_flattening);
  } else {
    const CapacitySweep sweep = capacity_sweep(capacities, spec);
    report.sweep = sweep.result;
    std::vector<double> diag;
    for (const auto& r : sweep.result.diagonal()) diag.push_back(r.savings_pct);
    const auto f = find_flattening(diag);
    report.summary["flattening_capacity_wh"] = f ? nlohmann::json(capacities[*f]) : nlohmann::json(nullptr);
  }
  emit_report(report, out_dir);
  log << "wrote " << out_dir << '\n';
}

void cmd_oracle(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  auto eval_load = std::make_shared<const LoadProfile>(config.split_profiles().second);
  const EnvConfig env = config.env_config(eval_load);
  env.check();
  const DispatchPlan plan = run_oracle(eval_load->hourly(), env, config.oracle);
  const double savings = plan.baseline_cost > 0.0 ? cost_saving(plan.total_cost, plan.baseline_cost) : 0.0;

  Report report;
  for (auto& t : traces_from_plan(plan, eval_load->hourly(), env.tariff, env.battery, env.dr))
    report.traces.emplace_back(day_name(t.day), std::move(t));
  report.summary = {{"days", eval_load->day_count()},
                    {"quantum_wh", config.oracle.quantum_wh},
                    {"baseline_cost", plan.baseline_cost},
                    {"optimal_cost", plan.total_cost},
                    {"savings_pct", savings}};
  emit_report(report, out_dir);
  log << "optimal savings " << format_number(savings) << "%\n";
}

void cmd_explain(const RunConfig& config, const std::string& run_dir, const std::string& out_dir,
                 std::ostream& log) {
  const fs::path dir = fs::path(run_dir) / "checkpoints";
  if (!fs::is_directory(dir)) throw DataError("no checkpoints directory in " + run_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".ckpt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no checkpoints in " + dir.string());

  std::vector<Checkpoint> checkpoints;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    std::size_t epoch = 0;
    if (stem.rfind("epoch_", 0) == 0) epoch = std::stoul(stem.substr(6));
    checkpoints.push_back({epoch, load_checkpoint(f.string())});
  }

  auto eval_load = std::make_shared<const LoadProfile>(config.split_profiles().second);
  const EnvConfig env = config.env_config(eval_load);
  env.check();
  if (config.probe_day >= eval_load->day_count())
    throw ConfigError("explain.probe_day " + std::to_string(config.probe_day) + " out of range");

  Report report;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& c : checkpoints) {
    const Evaluation ev = evaluate(c.params, env, {config.probe_day});
    const EpisodeTrace& trace = ev.traces.front();
    const SlotActionHistogram h = slot_histogram(trace, env.tariff, c.epoch);
    report.traces.emplace_back(epoch_name(c.epoch), trace);
    report.histograms.emplace_back(epoch_name(c.epoch), h);
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : h.slots) {
      slots.push_back({{"slot_start", s.start_hour},
                       {"slot_end", s.end_hour},
                       {"charged_share", h.charged_share(s.start_hour, s.end_hour)},
                       {"discharged_share", h.discharged_share(s.start_hour, s.end_hour)}});
    }
    epochs.push_back({{"epoch", c.epoch}, {"savings_pct", ev.savings_pct}, {"slots", slots}});
  }
  report.summary = {{"run", run_dir}, {"probe_day", config.probe_day}, {"epochs", epochs}};
  emit_report(report, out_dir);
  log << "explained " << checkpoints.size() << " checkpoints\n";
}

void cmd_gen_data(const SyntheticSpec& spec, const std::string& path, std::ostream& log) {
  spec.check();
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const LoadProfile profile = generate(spec);
  write_csv(profile, path);
  log << "wrote " << spec.days << " days to " << path << " (sha256 " << profile.digest() << ")\n";
}

namespace {

std::string keys_help(const std::vector<std::string>& prefixes) {
  std::string text = "\nConfig keys (set in --config files or with --set key=value):\n";
  for (const ConfigKey& k : config_keys()) {
    const bool wanted = std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
      return k.key == p || k.key.rfind(p + ".", 0) == 0;
    });
    if (!wanted) continue;
    std::string line = "  " + k.key;
    if (line.size() < 32) line.resize(32, ' ');
    text += line + " " + k.help + "\n";
  }
  return text;
}

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& flags) {
  app->add_option("--config", flags.config_file, "config file of dotted keys");
  app->add_option("--set", flags.overrides, "override one key, key=value (repeatable)");
  app->add_option("--seed", flags.seed, "run seed");
  app->add_option("--out", flags.out, "output directory (overrides output.dir)");
}

RunConfig build_config(const CommonFlags& flags, const std::string& fallback_file = {}) {
  RunConfig config;
  const std::string file = flags.config_file.empty() ? fallback_file : flags.config_file;
  if (!file.empty()) {
    if (!fs::exists(file)) throw ConfigError("config file not found: " + file);
    config = RunConfig::from_kv(KeyValueFile::load(file));
  }
  for (const auto& o : flags.overrides) apply_override(config, o);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out.empty()) config.output_dir = flags.out;
  return config;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Battery dispatch with a dueling double DQN, plus an exact dispatch oracle"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  const std::vector<std::string> env_keys = {"tariff", "battery", "dr", "env", "data", "seed", "output"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> k = env_keys;
    k.insert(k.end(), extra.begin(), extra.end());
    return k;
  };

  CommonFlags train_flags, eval_flags, sweep_flags, oracle_flags, explain_flags;
  std::string checkpoint, run_dir;
  std::size_t jobs = 1;

  auto* train = app.add_subcommand("train", "train an agent; writes checkpoints, manifest and training records");
  add_common(train, train_flags);
  train->footer(keys_help(with({"agent", "network", "replay"})));

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint; writes traces and a savings summary");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->footer(keys_help(with({"eval", "oracle"})));

  auto* sweep = app.add_subcommand("sweep", "capacity sweep with cross evaluation and oracle column");
  add_common(sweep, sweep_flags);
  sweep->add_option("--jobs", jobs, "concurrent sweep cells")->check(CLI::PositiveNumber);
  sweep->footer(keys_help({"tariff", "dr", "env", "data", "agent", "network", "replay", "sweep", "oracle",
                           "seed", "output"}));

  auto* oracle = app.add_subcommand("oracle", "optimal dispatch plan and savings for the configured instance");
  add_common(oracle, oracle_flags);
  oracle->footer(keys_help({"tariff", "battery", "dr", "data", "eval", "oracle", "seed", "output"}));

  auto* explain = app.add_subcommand("explain", "per-slot action histograms for every checkpoint of a run");
  add_common(explain, explain_flags);
  explain->add_option("--run", run_dir, "training output directory")->required();
  explain->footer(keys_help(with({"eval", "explain"})) +
                  "Without --config, the run's config.conf is used.\n");

  SyntheticSpec gen;
  int gen_days = gen.days;
  std::uint64_t gen_seed = gen.seed;
  std::string gen_out = "load.csv";
  std::vector<std::string> gen_overrides;
  auto* gen_data = app.add_subcommand("gen-data", "write a synthetic hourly load profile CSV");
  gen_data->add_option("--days", gen_days, "profile length in days")->check(CLI::PositiveNumber);
  gen_data->add_option("--seed", gen_seed, "profile seed");
  gen_data->add_option("--out", gen_out, "output CSV path");
  gen_data->add_option("--set", gen_overrides, "override a data.synthetic.* key, key=value (repeatable)");
  gen_data->footer(keys_help({"data.synthetic"}));

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (train->parsed()) {
      const RunConfig c = build_config(train_flags);
      cmd_train(c, resolve_output_dir(c), out);
    } else if (eval->parsed()) {
      const RunConfig c = build_config(eval_flags);
      cmd_eval(c, checkpoint, resolve_output_dir(c), out);
    } else if (sweep->parsed()) {
      const RunConfig c = build_config(sweep_flags);
      cmd_sweep(c, jobs, resolve_output_dir(c), out);
    } else if (oracle->parsed()) {
      const RunConfig c = build_config(oracle_flags);
      cmd_oracle(c, resolve_output_dir(c), out);
    } else if (explain->parsed()) {
      const std::string saved = (fs::path(run_dir) / "config.conf").string();
      const RunConfig c = build_config(explain_flags, fs::exists(saved) ? saved : std::string());
      cmd_explain(c, run_dir, resolve_output_dir(c), out);
    } else if (gen_data->parsed()) {
      RunConfig c;
      for (const auto& o : gen_overrides) {
        if (o.rfind("data.synthetic.", 0) != 0) throw ConfigError("gen-data only reads data.synthetic.* keys");
        apply_override(c, o);
      }
      if (gen_data->count("--days")) c.synthetic.days = gen_days;
      if (gen_data->count("--seed")) c.synthetic.seed = gen_seed;
      cmd_gen_data(c.synthetic, gen_out, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    err << "incompatible checkpoint: " << e.what() << '\n';
    return 2;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace storage_dqn
