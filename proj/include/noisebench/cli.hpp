#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "noisebench/harness.hpp"
#include "noisebench/report.hpp"

namespace noisebench {

struct CorruptArgs {
  std::string data_dir;
  std::string out_dir;
  std::string set = "train";  // which split to corrupt and export
  CorruptionSpec spec;
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;  // optional; curves.csv + metrics.json written when set
  TrainConfig train;
  std::optional<CorruptionSpec> spec;  // train-set pollution and corrupted-test spec
  double fraction = 0.0;
  std::uint64_t split_seed = 0;
  int train_subset = 0;
  int val_subset = 0;
};

struct EvaluateArgs {
  std::string data_dir;
  std::string checkpoint;
  nn::ModelKind model = nn::ModelKind::smallcnn;
  std::optional<CorruptionSpec> spec;  // when present, also score the corrupted test set
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  int eval_batch = 100;
};

struct SweepArgs {
  std::string data_dir;
  std::string out_dir;
  TrainConfig train;
  std::vector<double> fractions;
  std::vector<CorruptionSpec> specs;
  std::vector<std::uint64_t> seeds;
  std::uint64_t split_seed = 0;
  int train_subset = 0;
  int val_subset = 0;
};

struct ReportArgs {
  std::string runs_dir = ".";  // directory holding runs.csv
  std::string out_path;        // default <runs_dir>/aggregate.csv
};

using Command = std::variant<CorruptArgs, TrainArgs, EvaluateArgs, SweepArgs, ReportArgs>;

struct ParseOutcome {
  std::optional<Command> command;  // absent when help was shown or parsing failed
  int exit_code = 0;               // 0 for success/help, 2 for usage errors
  std::string message;             // help text or error description
};

// Pure argument handling (no side effects); args exclude the program name.
ParseOutcome parse_args(const std::vector<std::string>& args);

// Execute a parsed command: 0 on success, 1 on runtime failure.
int run_command(const Command& cmd);

int cli_main(int argc, char** argv);

}  // namespace noisebench
