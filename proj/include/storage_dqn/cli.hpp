#pragma once

#include <iosfwd>
#include <string>

#include "storage_dqn/run_config.hpp"

namespace storage_dqn {

// Each command writes its artifacts under out_dir and returns normally, or throws
// one of the errors in errors.hpp. run_cli maps those to exit codes.
void cmd_train(const RunConfig& config, const std::string& out_dir, std::ostream& log);
void cmd_eval(const RunConfig& config, const std::string& checkpoint, const std::string& out_dir,
              std::ostream& log);
void cmd_sweep(const RunConfig& config, std::size_t jobs, const std::string& out_dir, std::ostream& log);
void cmd_oracle(const RunConfig& config, const std::string& out_dir, std::ostream& log);
// Histograms for every checkpoint of a finished training run.
void cmd_explain(const RunConfig& config, const std::string& run_dir, const std::string& out_dir,
                 std::ostream& log);
void cmd_gen_data(const SyntheticSpec& spec, const std::string& path, std::ostream& log);

// Output directory for a run: output.dir resolved against STORAGE_DQN_OUT when that is
// set and output.dir is relative.
std::string resolve_output_dir(const RunConfig& config);

// 0 success, 1 internal error, 2 user or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace storage_dqn
