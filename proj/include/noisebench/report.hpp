#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "noisebench/harness.hpp"

namespace noisebench {

// Run configuration recorded alongside results so every artifact is
// reproducible from its manifest.
struct SweepMeta {
  TrainConfig train;
  std::vector<double> fractions;
  std::vector<CorruptionSpec> specs;
  std::vector<std::uint64_t> seeds;
  std::uint64_t split_seed = 0;
  int train_subset = 0;
  int val_subset = 0;
  std::string data_dir;
  int workers = 1;
};

// Fixed schemas; per-run scalars carry 9 significant digits (exact for 32-bit
// values), aggregate statistics 17 (exact for 64-bit values).
extern const std::string kRunsCsvHeader;
extern const std::string kAggregateCsvHeader;

void write_runs_csv(const std::vector<RunRecord>& runs, const std::filesystem::path& path);
void write_aggregate_csv(const std::vector<CellAggregate>& cells,
                         const std::filesystem::path& path);

// runs.csv + aggregate.csv + manifest.json under out_dir.
void emit_report(const SweepReport& report, const SweepMeta& meta,
                 const std::filesystem::path& out_dir);

// Inverse of write_runs_csv (loss/accuracy scalars only; curves are not part
// of the CSV schema).
std::vector<RunRecord> parse_runs_csv(const std::filesystem::path& path);

}  // namespace noisebench
