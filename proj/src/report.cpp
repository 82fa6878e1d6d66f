#include "noisebench/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace noisebench {

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string stat_columns() {
  std::string out;
  for (const char* name : kMetricFieldNames)
    out += std::string(",mean_") + name + ",std_" + name;
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(std::string("runs CSV: bad ") + what + " value '" + s + "'");
  return v;
}

float parse_float(const std::string& s, const char* what) {
  char* end = nullptr;
  const float v = std::strtof(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(std::string("runs CSV: bad ") + what + " value '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const char* what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(std::string("runs CSV: bad ") + what + " value '" + s + "'");
  return v;
}

}  // namespace

const std::string kRunsCsvHeader =
    "run_id,noise_type,intensity,fraction,seed,best_epoch,clean_loss,clean_acc,"
    "noisy_loss,noisy_acc,per_class_0,per_class_1,per_class_2,per_class_3,per_class_4,"
    "per_class_5,per_class_6,per_class_7,per_class_8,per_class_9,status";

const std::string kAggregateCsvHeader =
    "noise_type,intensity,fraction,n_runs,n_used" + stat_columns();

void write_runs_csv(const std::vector<RunRecord>& runs, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << kRunsCsvHeader << '\n';
  for (const RunRecord& run : runs) {
    out << run.run_id << ',' << to_string(run.spec.type) << ',' << g9(run.spec.param) << ','
        << g9(run.fraction) << ',' << run.seed << ',' << run.metrics.best_epoch << ','
        << g9(run.metrics.clean_loss) << ',' << g9(run.metrics.clean_acc) << ','
        << g9(run.metrics.noisy_loss) << ',' << g9(run.metrics.noisy_acc);
    for (float v : run.metrics.per_class) out << ',' << g9(v);
    if (run.diverged)
      out << ",diverged@" << run.diverged_epoch << '\n';
    else
      out << ",ok\n";
  }
  out.flush();
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void write_aggregate_csv(const std::vector<CellAggregate>& cells,
                         const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << kAggregateCsvHeader << '\n';
  for (const CellAggregate& cell : cells) {
    out << to_string(cell.spec.type) << ',' << g9(cell.spec.param) << ',' << g9(cell.fraction)
        << ',' << cell.n_total << ',' << cell.n_used;
    for (int f = 0; f < kAggFields; ++f)
      out << ',' << g17(cell.mean[f]) << ',' << g17(cell.stddev[f]);
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void emit_report(const SweepReport& report, const SweepMeta& meta,
                 const std::filesystem::path& out_dir) {
  if (report.runs.empty()) throw ValueError("emit_report: no runs to write");
  std::filesystem::create_directories(out_dir);

  write_runs_csv(report.runs, out_dir / "runs.csv");
  write_aggregate_csv(report.cells, out_dir / "aggregate.csv");

  nlohmann::json specs = nlohmann::json::array();
  for (const CorruptionSpec& spec : meta.specs)
    specs.push_back({{"type", to_string(spec.type)}, {"param", spec.param}});

  int excluded = 0;
  for (const RunRecord& run : report.runs) excluded += run.diverged ? 1 : 0;

  const nlohmann::json manifest = {
      {"schema", 1},
      {"model", to_string(meta.train.model)},
      {"epochs", meta.train.epochs},
      {"train_batch", meta.train.train_batch},
      {"eval_batch", meta.train.eval_batch},
      {"optim",
       {{"learning_rate", meta.train.optim.learning_rate},
        {"momentum", meta.train.optim.momentum},
        {"weight_decay", meta.train.optim.weight_decay}}},
      {"augment", meta.train.augment},
      {"split_seed", meta.split_seed},
      {"train_subset", meta.train_subset},
      {"val_subset", meta.val_subset},
      {"data_dir", meta.data_dir},
      {"fractions", meta.fractions},
      {"noise", specs},
      {"seeds", meta.seeds},
      {"workers", meta.workers},
      {"runs", report.runs.size()},
      {"diverged_excluded", excluded},
      {"files", {{"runs", "runs.csv"}, {"aggregate", "aggregate.csv"}}},
  };
  std::ofstream out = open_out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("short write to '" + (out_dir / "manifest.json").string() + "'");
}

std::vector<RunRecord> parse_runs_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("runs CSV '" + path.string() + "' is empty");
  if (line == kRunsCsvHeader + "\r") line.pop_back();
  if (line != kRunsCsvHeader)
    throw ParseError("unrecognized runs CSV header in '" + path.string() + "'");

  std::vector<RunRecord> runs;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 21)
      throw ParseError("runs CSV: expected 21 fields, got " + std::to_string(f.size()));

    RunRecord run;
    run.run_id = static_cast<int>(parse_int(f[0], "run_id"));
    run.spec.type = noise_type_from_string(f[1]);
    run.spec.param = parse_double(f[2], "intensity");
    run.fraction = parse_double(f[3], "fraction");
    run.seed = static_cast<std::uint64_t>(parse_int(f[4], "seed"));
    run.metrics.best_epoch = static_cast<int>(parse_int(f[5], "best_epoch"));
    run.metrics.clean_loss = parse_float(f[6], "clean_loss");
    run.metrics.clean_acc = parse_float(f[7], "clean_acc");
    run.metrics.noisy_loss = parse_float(f[8], "noisy_loss");
    run.metrics.noisy_acc = parse_float(f[9], "noisy_acc");
    for (int k = 0; k < kClassCount; ++k)
      run.metrics.per_class[k] = parse_float(f[10 + k], "per_class");
    const std::string& status = f[20];
    if (status == "ok") {
      run.diverged = false;
    } else if (status.rfind("diverged@", 0) == 0) {
      run.diverged = true;
      run.diverged_epoch = static_cast<int>(parse_int(status.substr(9), "diverged epoch"));
    } else {
      throw ParseError("runs CSV: unknown status '" + status + "'");
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace noisebench
