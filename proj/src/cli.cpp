#include "noisebench/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noisebench/nn/checkpoint.hpp"

namespace noisebench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --------------------------------------------------------------------------
// JSON config files for CLI11 (`--config file.json`, explicit flags win).

class ConfigJson : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames()[0];
      if (opt->count() > 0) {
        const auto& results = opt->results();
        out[name] = results.size() == 1 ? json(results[0]) : json(results);
      } else if (default_also) {
        out[name] = opt->get_default_str();
      }
    }
    return out.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json root;
    try {
      input >> root;
    } catch (const json::parse_error& e) {
      throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!root.is_object())
      throw CLI::ConfigError("config file must hold a JSON object of flag values");
    std::vector<CLI::ConfigItem> items;
    walk(root, {}, items);
    return items;
  }

 private:
  static void walk(const json& node, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : node.items()) {
      if (value.is_object()) {
        std::vector<std::string> deeper = parents;
        deeper.push_back(key);
        walk(value, std::move(deeper), items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& element : value) item.inputs.push_back(scalar_string(element));
      } else {
        item.inputs.push_back(scalar_string(value));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    return value.dump();
  }
};

// --------------------------------------------------------------------------
// Shared flag groups.

struct NoiseCli {
  std::string type;
  std::string level;
  double sigma = 0.0;
  double p_total = 0.0;
  double sigma_blur = 0.0;
  CLI::Option* type_opt = nullptr;
  CLI::Option* level_opt = nullptr;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* p_opt = nullptr;
  CLI::Option* blur_opt = nullptr;
};

void add_noise_flags(CLI::App& cmd, NoiseCli& n, bool with_level) {
  n.type_opt =
      cmd.add_option("--noise", n.type, "noise type: gaussian, salt-pepper, blur");
  n.sigma_opt = cmd.add_option("--sigma", n.sigma, "gaussian noise standard deviation");
  n.p_opt = cmd.add_option("--p-total", n.p_total, "salt-and-pepper total density");
  n.blur_opt = cmd.add_option("--sigma-blur", n.sigma_blur, "gaussian blur sigma");
  n.sigma_opt->excludes(n.p_opt)->excludes(n.blur_opt);
  n.p_opt->excludes(n.blur_opt);
  if (with_level) {
    n.level_opt = cmd.add_option("--level", n.level, "severity preset: mild, moderate, strong")
                      ->check(CLI::IsMember({"mild", "moderate", "strong"}));
    n.level_opt->excludes(n.sigma_opt)->excludes(n.p_opt)->excludes(n.blur_opt);
  }
}

// Translate the noise flag group into a spec; flag misuse is a usage error.
std::optional<CorruptionSpec> resolve_noise(const NoiseCli& n, bool required) {
  const bool has_level = n.level_opt != nullptr && n.level_opt->count() > 0;
  const int numerics = (n.sigma_opt->count() > 0 ? 1 : 0) + (n.p_opt->count() > 0 ? 1 : 0) +
                       (n.blur_opt->count() > 0 ? 1 : 0);
  if (n.type_opt->count() == 0) {
    if (has_level || numerics > 0)
      throw UsageError("--level, --sigma, --p-total, and --sigma-blur require --noise");
    if (required) throw UsageError("--noise is required");
    return std::nullopt;
  }

  NoiseType type;
  try {
    type = noise_type_from_string(n.type);
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }

  try {
    if (has_level) return preset(type, severity_from_string(n.level));
    if (n.sigma_opt->count() > 0) {
      if (type != NoiseType::gaussian)
        throw UsageError("--sigma applies only to --noise gaussian");
      return CorruptionSpec::make_gaussian(n.sigma);
    }
    if (n.p_opt->count() > 0) {
      if (type != NoiseType::salt_pepper)
        throw UsageError("--p-total applies only to --noise salt-pepper");
      return CorruptionSpec::make_salt_pepper(n.p_total);
    }
    if (n.blur_opt->count() > 0) {
      if (type != NoiseType::blur)
        throw UsageError("--sigma-blur applies only to --noise blur");
      return CorruptionSpec::make_blur(n.sigma_blur);
    }
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }
  throw UsageError(
      "specify --level or the matching numeric parameter (--sigma, --p-total, --sigma-blur)");
}

struct TrainFlagSet {
  std::string model = "smallcnn";
  std::string profile;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 100;
  int train_batch = 128;
  int eval_batch = 100;
  bool augment = true;
  std::uint64_t split_seed = 0;
  int train_subset = 0;
  int val_subset = 0;
  CLI::Option* model_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* train_subset_opt = nullptr;
  CLI::Option* val_subset_opt = nullptr;
};

void add_train_flags(CLI::App& cmd, TrainFlagSet& t, const char* default_profile) {
  t.profile = default_profile;
  cmd.add_option("--profile", t.profile,
                 "config preset: desk (smallcnn, 30 epochs, 5000/1000 subsets) or paper "
                 "(resnet18, 100 epochs, full split)")
      ->check(CLI::IsMember({"desk", "paper", ""}));
  t.model_opt = cmd.add_option("--model", t.model, "architecture: smallcnn or resnet18")
                    ->check(CLI::IsMember({"smallcnn", "resnet18"}));
  t.epochs_opt =
      cmd.add_option("--epochs", t.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd.add_option("--train-batch", t.train_batch, "training batch size")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--eval-batch", t.eval_batch, "evaluation batch size")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--lr", t.lr, "SGD learning rate")->check(CLI::PositiveNumber);
  cmd.add_option("--momentum", t.momentum, "SGD momentum, in [0,1)");
  cmd.add_option("--weight-decay", t.weight_decay, "L2 weight decay")
      ->check(CLI::NonNegativeNumber);
  cmd.add_flag("--augment,!--no-augment", t.augment,
               "random crop/flip augmentation during training");
  cmd.add_option("--split-seed", t.split_seed, "train/validation split seed");
  t.train_subset_opt = cmd.add_option("--train-subset", t.train_subset,
                                      "stratified train subset size (0 = full split)")
                           ->check(CLI::NonNegativeNumber);
  t.val_subset_opt = cmd.add_option("--val-subset", t.val_subset,
                                    "stratified validation subset size (0 = full split)")
                         ->check(CLI::NonNegativeNumber);
}

struct ProfilePreset {
  nn::ModelKind model;
  int epochs;
  int train_subset;
  int val_subset;
  std::vector<std::uint64_t> seeds;
};

ProfilePreset profile_preset(const std::string& name) {
  if (name == "desk") return {nn::ModelKind::smallcnn, 30, 5000, 1000, {0, 1, 2}};
  return {nn::ModelKind::resnet18, 100, 0, 0, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
}

// Profile values are defaults; explicitly given flags (command line or config
// file) win.
void apply_train_flags(const TrainFlagSet& t, TrainConfig& cfg, int& train_subset,
                       int& val_subset, std::uint64_t& split_seed) {
  if (!t.profile.empty()) {
    const ProfilePreset p = profile_preset(t.profile);
    cfg.model = p.model;
    cfg.epochs = p.epochs;
    train_subset = p.train_subset;
    val_subset = p.val_subset;
  }
  if (t.model_opt->count() > 0 || t.profile.empty()) cfg.model = nn::model_kind_from_string(t.model);
  if (t.epochs_opt->count() > 0 || t.profile.empty()) cfg.epochs = t.epochs;
  if (t.train_subset_opt->count() > 0 || t.profile.empty()) train_subset = t.train_subset;
  if (t.val_subset_opt->count() > 0 || t.profile.empty()) val_subset = t.val_subset;

  if (t.momentum < 0.0 || t.momentum >= 1.0) throw UsageError("--momentum must lie in [0,1)");
  cfg.train_batch = t.train_batch;
  cfg.eval_batch = t.eval_batch;
  cfg.optim.learning_rate = t.lr;
  cfg.optim.momentum = t.momentum;
  cfg.optim.weight_decay = t.weight_decay;
  cfg.augment = t.augment;
  split_seed = t.split_seed;
}

const std::vector<double> kDefaultFractions = {0.0,  0.05, 0.10, 0.15, 0.20,
                                               0.25, 0.50, 0.75, 1.00};

std::string usage_hint(const std::string& sub) {
  return "\nRun 'noisebench " + (sub.empty() ? std::string("--help'") : sub + " --help'") +
         " for usage.";
}

// CLI11 reads `--config` files only for the app parse() is invoked on, never
// for a config option attached to a subcommand, so the file is applied by
// hand after parsing: each key feeds the matching option unless the command
// line already set it, keeping explicit flags authoritative.
void apply_config_file(CLI::App& cmd) {
  CLI::Option* config_opt = cmd.get_config_ptr();
  if (config_opt == nullptr || config_opt->count() == 0) return;
  const auto path = config_opt->as<std::string>();
  std::ifstream input(path);
  if (!input) throw UsageError("cannot open config file '" + path + "'");
  try {
    for (const CLI::ConfigItem& item : cmd.get_config_formatter()->from_config(input)) {
      if (!item.parents.empty())
        throw UsageError("config file key '" + item.fullname() + "' is not a flat flag name");
      CLI::Option* opt = cmd.get_option_no_throw("--" + item.name);
      if (opt == nullptr || opt == config_opt || !opt->get_configurable())
        throw UsageError("config file sets unknown flag '" + item.name + "'");
      if (opt->count() > 0) continue;  // explicit flags win
      if (opt->get_expected_min() == 0) {
        // Flags route through the flag-name mapping so negated spellings
        // ("no-augment") and boolean values land correctly.
        const std::string raw = cmd.get_config_formatter()->to_flag(item);
        opt->add_result(opt->get_flag_value(item.name, raw));
      } else {
        for (const std::string& value : item.inputs) opt->add_result(value);
      }
      opt->run_callback();
    }
  } catch (const CLI::Error& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

ParseOutcome parse_args(const std::vector<std::string>& args) {
  CLI::App app{"CIFAR-10 corruption-robustness toolkit: corrupt data, train under polluted "
               "training sets, and sweep noise-type/intensity/fraction grids."};
  app.name("noisebench");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  auto config_formatter = std::make_shared<ConfigJson>();

  // ---- corrupt ----
  CorruptArgs corrupt;
  NoiseCli corrupt_noise;
  CLI::App& c_cmd = *app.add_subcommand(
      "corrupt", "Corrupt a dataset split and export it in CIFAR-10 binary layout");
  c_cmd.add_option("--data-dir", corrupt.data_dir, "directory with CIFAR-10 binary batches")
      ->required();
  c_cmd.add_option("--out", corrupt.out_dir, "output directory")->required();
  c_cmd.add_option("--set", corrupt.set, "which split to corrupt: train or test")
      ->check(CLI::IsMember({"train", "test"}));
  add_noise_flags(c_cmd, corrupt_noise, /*with_level=*/true);
  c_cmd.add_option("--fraction", corrupt.fraction, "fraction of images to corrupt")
      ->check(CLI::Range(0.0, 1.0));
  c_cmd.add_option("--seed", corrupt.seed, "selection/noise master seed");
  c_cmd.set_config("--config", "", "JSON config file (explicit flags win)");
  c_cmd.config_formatter(config_formatter);

  // ---- train ----
  TrainArgs train_args;
  TrainFlagSet train_flags;
  NoiseCli train_noise;
  CLI::Option* train_fraction_opt = nullptr;
  CLI::App& t_cmd = *app.add_subcommand(
      "train", "Train one model, optionally on a partially corrupted train split");
  t_cmd.add_option("--data-dir", train_args.data_dir, "directory with CIFAR-10 binary batches")
      ->required();
  t_cmd.add_option("--out", train_args.out_dir, "directory for curves.csv and metrics.json");
  add_train_flags(t_cmd, train_flags, /*default_profile=*/"");
  t_cmd.add_option("--seed", train_args.train.seed, "run master seed");
  t_cmd.add_option("--checkpoint", train_args.train.checkpoint_path,
                   "checkpoint path, written at every new best-validation-loss epoch");
  add_noise_flags(t_cmd, train_noise, /*with_level=*/true);
  train_fraction_opt =
      t_cmd.add_option("--fraction", train_args.fraction, "fraction of train images to corrupt")
          ->check(CLI::Range(0.0, 1.0));
  t_cmd.set_config("--config", "", "JSON config file (explicit flags win)");
  t_cmd.config_formatter(config_formatter);

  // ---- evaluate ----
  EvaluateArgs eval_args;
  NoiseCli eval_noise;
  std::string eval_model = "smallcnn";
  CLI::App& e_cmd = *app.add_subcommand(
      "evaluate", "Score a checkpoint on the clean and optionally a corrupted test set");
  e_cmd.add_option("--data-dir", eval_args.data_dir, "directory with CIFAR-10 binary batches")
      ->required();
  e_cmd.add_option("--checkpoint", eval_args.checkpoint, "checkpoint to load")->required();
  e_cmd.add_option("--model", eval_model, "architecture: smallcnn or resnet18")
      ->check(CLI::IsMember({"smallcnn", "resnet18"}));
  add_noise_flags(e_cmd, eval_noise, /*with_level=*/true);
  e_cmd.add_option("--seed", eval_args.seed, "test corruption seed");
  e_cmd.add_option("--split-seed", eval_args.split_seed,
                   "split seed used when the model was trained (fixes normalization stats)");
  e_cmd.add_option("--eval-batch", eval_args.eval_batch, "evaluation batch size")
      ->check(CLI::PositiveNumber);
  e_cmd.set_config("--config", "", "JSON config file (explicit flags win)");
  e_cmd.config_formatter(config_formatter);

  // ---- sweep ----
  SweepArgs sweep_args;
  TrainFlagSet sweep_flags;
  NoiseCli sweep_noise;
  std::vector<std::string> sweep_levels;
  std::vector<double> sweep_fractions;
  std::vector<std::uint64_t> sweep_seeds;
  int sweep_runs = 0;
  CLI::Option *levels_opt = nullptr, *fractions_opt = nullptr, *seeds_opt = nullptr,
              *runs_opt = nullptr;
  CLI::App& s_cmd = *app.add_subcommand(
      "sweep", "Run the full grid: noise types x intensities x pollution fractions x seeds");
  s_cmd.add_option("--data-dir", sweep_args.data_dir, "directory with CIFAR-10 binary batches")
      ->required();
  s_cmd.add_option("--out", sweep_args.out_dir, "output directory for CSVs and manifest")
      ->required();
  add_train_flags(s_cmd, sweep_flags, /*default_profile=*/"desk");
  add_noise_flags(s_cmd, sweep_noise, /*with_level=*/false);
  levels_opt = s_cmd.add_option("--levels", sweep_levels,
                                "severity presets to sweep (default: mild,moderate,strong)")
                   ->delimiter(',')
                   ->check(CLI::IsMember({"mild", "moderate", "strong"}));
  fractions_opt = s_cmd.add_option("--fractions", sweep_fractions,
                                   "pollution fractions (default: 0,0.05,0.1,0.15,0.2,0.25,"
                                   "0.5,0.75,1)")
                      ->delimiter(',')
                      ->check(CLI::Range(0.0, 1.0));
  seeds_opt = s_cmd.add_option("--seeds", sweep_seeds, "explicit run seeds")->delimiter(',');
  runs_opt = s_cmd.add_option("--runs", sweep_runs, "number of runs (seeds 0..n-1)")
                 ->check(CLI::PositiveNumber);
  seeds_opt->excludes(runs_opt);
  s_cmd.set_config("--config", "", "JSON config file (explicit flags win)");
  s_cmd.config_formatter(config_formatter);

  // ---- report ----
  ReportArgs report_args;
  CLI::App& r_cmd =
      *app.add_subcommand("report", "Recompute the aggregate CSV from an existing runs.csv");
  r_cmd.add_option("--dir", report_args.runs_dir, "directory holding runs.csv");
  r_cmd.add_option("--out", report_args.out_path, "aggregate CSV path (default <dir>/aggregate.csv)");

  ParseOutcome outcome;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    outcome.message = parsed.empty() ? app.help() : parsed.front()->help();
    return outcome;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      outcome.message = app.help();
      return outcome;
    }
    std::string sub;
    const auto parsed = app.get_subcommands();
    if (!parsed.empty()) sub = parsed.front()->get_name();
    outcome.exit_code = 2;
    outcome.message = std::string("error: ") + e.what() + usage_hint(sub);
    return outcome;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) apply_config_file(*sub);

    if (app.got_subcommand(&c_cmd)) {
      corrupt.spec = *resolve_noise(corrupt_noise, /*required=*/true);
      outcome.command = corrupt;
    } else if (app.got_subcommand(&t_cmd)) {
      apply_train_flags(train_flags, train_args.train, train_args.train_subset,
                        train_args.val_subset, train_args.split_seed);
      train_args.spec = resolve_noise(train_noise, /*required=*/false);
      if (!train_args.spec && train_fraction_opt->count() > 0 && train_args.fraction > 0.0)
        throw UsageError("--fraction requires --noise");
      outcome.command = train_args;
    } else if (app.got_subcommand(&e_cmd)) {
      eval_args.model = nn::model_kind_from_string(eval_model);
      eval_args.spec = resolve_noise(eval_noise, /*required=*/false);
      outcome.command = eval_args;
    } else if (app.got_subcommand(&s_cmd)) {
      apply_train_flags(sweep_flags, sweep_args.train, sweep_args.train_subset,
                        sweep_args.val_subset, sweep_args.split_seed);

      const int numerics = (sweep_noise.sigma_opt->count() > 0 ? 1 : 0) +
                           (sweep_noise.p_opt->count() > 0 ? 1 : 0) +
                           (sweep_noise.blur_opt->count() > 0 ? 1 : 0);
      if (numerics > 0) {
        if (levels_opt->count() > 0)
          throw UsageError("--levels cannot be combined with an explicit numeric parameter");
        sweep_args.specs = {*resolve_noise(sweep_noise, /*required=*/true)};
      } else {
        std::vector<NoiseType> types;
        if (sweep_noise.type_opt->count() > 0) {
          try {
            types = {noise_type_from_string(sweep_noise.type)};
          } catch (const ValueError& e) {
            throw UsageError(e.what());
          }
        } else {
          types = {NoiseType::gaussian, NoiseType::salt_pepper, NoiseType::blur};
        }
        const std::vector<std::string> levels =
            sweep_levels.empty() ? std::vector<std::string>{"mild", "moderate", "strong"}
                                 : sweep_levels;
        for (NoiseType type : types)
          for (const std::string& level : levels)
            sweep_args.specs.push_back(preset(type, severity_from_string(level)));
      }

      sweep_args.fractions = fractions_opt->count() > 0 ? sweep_fractions : kDefaultFractions;
      if (seeds_opt->count() > 0) {
        sweep_args.seeds = sweep_seeds;
      } else if (runs_opt->count() > 0) {
        for (int i = 0; i < sweep_runs; ++i)
          sweep_args.seeds.push_back(static_cast<std::uint64_t>(i));
      } else {
        sweep_args.seeds = profile_preset(sweep_flags.profile.empty() ? "desk"
                                                                      : sweep_flags.profile)
                               .seeds;
      }
      if (sweep_args.seeds.empty()) throw UsageError("--seeds must not be empty");
      outcome.command = sweep_args;
    } else if (app.got_subcommand(&r_cmd)) {
      outcome.command = report_args;
    }
  } catch (const UsageError& e) {
    std::string sub;
    const auto parsed = app.get_subcommands();
    if (!parsed.empty()) sub = parsed.front()->get_name();
    outcome.exit_code = 2;
    outcome.message = std::string("error: ") + e.what() + usage_hint(sub);
    outcome.command.reset();
  }
  return outcome;
}

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int do_corrupt(const CorruptArgs& a) {
  const bool is_train = a.set == "train";
  Dataset data = is_train ? load_cifar_train(a.data_dir) : load_cifar_test(a.data_dir);
  PollutedDataset out = pollute(data, PollutionPlan{a.fraction, a.spec, a.seed});

  fs::create_directories(a.out_dir);
  if (is_train) {
    const std::size_t per_batch = out.data.size() / kTrainBatchFiles;
    for (int b = 0; b < kTrainBatchFiles; ++b) {
      const std::vector<LabeledExample> chunk(
          out.data.examples.begin() + b * per_batch,
          out.data.examples.begin() + (b + 1) * per_batch);
      write_file(train_batch_path(a.out_dir, b), serialize_batch(chunk));
    }
  } else {
    write_file(fs::path(a.out_dir) / "test_batch.bin", serialize_batch(out.data.examples));
  }

  std::ofstream manifest(fs::path(a.out_dir) / "manifest.txt", std::ios::binary);
  if (!manifest)
    throw IoError("cannot open '" + (fs::path(a.out_dir) / "manifest.txt").string() +
                  "' for writing");
  for (std::uint32_t idx : out.corrupted_indices) manifest << idx << '\n';

  std::cout << "corrupted " << out.corrupted_indices.size() << " of " << out.data.size() << " "
            << a.set << " images (" << to_string(a.spec.type) << " " << g9(a.spec.param)
            << ", fraction " << g9(a.fraction) << ", seed " << a.seed << ") -> " << a.out_dir
            << "\n";
  return 0;
}

int do_train(const TrainArgs& a) {
  const Pipeline data =
      prepare_data({a.data_dir, a.split_seed, a.train_subset, a.val_subset});

  const Dataset* train_set = &data.train;
  PollutedDataset polluted;
  if (a.spec && a.fraction > 0.0) {
    polluted = pollute(data.train, PollutionPlan{a.fraction, *a.spec, a.train.seed});
    train_set = &polluted.data;
    std::cout << "polluted " << polluted.corrupted_indices.size() << " of "
              << polluted.data.size() << " train images with " << to_string(a.spec->type) << " "
              << g9(a.spec->param) << "\n";
  }

  TrainResult result = train(*train_set, data.validation, data.stats, a.train);
  const RunMetrics& m = result.metrics;
  std::cout << "best epoch " << m.best_epoch << " (validation loss "
            << g9(m.val_loss[m.best_epoch]) << ", accuracy " << g9(m.val_acc[m.best_epoch])
            << ")\n";

  const EvalResult clean = evaluate(result.model, data.test, data.stats, a.train.eval_batch);
  std::cout << "clean test: loss " << g9(clean.loss) << ", accuracy " << g9(clean.top1) << "\n";

  json metrics = {
      {"model", to_string(a.train.model)},
      {"epochs", a.train.epochs},
      {"seed", a.train.seed},
      {"fraction", a.fraction},
      {"best_epoch", m.best_epoch},
      {"clean", {{"loss", clean.loss}, {"accuracy", clean.top1}, {"per_class", clean.per_class}}},
      {"noise", nullptr},
  };
  if (a.spec) {
    const Dataset noisy = corrupt_test_set(data.test, *a.spec, a.train.seed);
    const EvalResult ne = evaluate(result.model, noisy, data.stats, a.train.eval_batch);
    std::cout << "corrupted test (" << to_string(a.spec->type) << " " << g9(a.spec->param)
              << "): loss " << g9(ne.loss) << ", accuracy " << g9(ne.top1) << "\n";
    metrics["noise"] = {{"type", to_string(a.spec->type)}, {"param", a.spec->param}};
    metrics["corrupted"] = {
        {"loss", ne.loss}, {"accuracy", ne.top1}, {"per_class", ne.per_class}};
  }

  if (!a.train.checkpoint_path.empty())
    std::cout << "checkpoint written to " << a.train.checkpoint_path << "\n";

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    std::ofstream curves(fs::path(a.out_dir) / "curves.csv", std::ios::binary);
    if (!curves)
      throw IoError("cannot open '" + (fs::path(a.out_dir) / "curves.csv").string() +
                    "' for writing");
    curves << "epoch,train_loss,val_loss,val_acc\n";
    for (std::size_t e = 0; e < m.train_loss.size(); ++e)
      curves << e << ',' << g9(m.train_loss[e]) << ',' << g9(m.val_loss[e]) << ','
             << g9(m.val_acc[e]) << '\n';
    std::ofstream mj(fs::path(a.out_dir) / "metrics.json", std::ios::binary);
    mj << metrics.dump(2) << '\n';
    std::cout << "wrote " << (fs::path(a.out_dir) / "curves.csv").string() << " and "
              << (fs::path(a.out_dir) / "metrics.json").string() << "\n";
  }
  return 0;
}

int do_evaluate(const EvaluateArgs& a) {
  const Pipeline data = prepare_data({a.data_dir, a.split_seed, 0, 0});
  nn::Model<float> model(a.model);
  nn::load_checkpoint(a.checkpoint, model);

  const EvalResult clean = evaluate(model, data.test, data.stats, a.eval_batch);
  json out = {
      {"checkpoint", a.checkpoint},
      {"model", to_string(a.model)},
      {"clean", {{"loss", clean.loss}, {"accuracy", clean.top1}, {"per_class", clean.per_class}}},
  };
  if (a.spec) {
    const Dataset noisy = corrupt_test_set(data.test, *a.spec, a.seed);
    const EvalResult ne = evaluate(model, noisy, data.stats, a.eval_batch);
    out["corrupted"] = {{"type", to_string(a.spec->type)},
                        {"param", a.spec->param},
                        {"seed", a.seed},
                        {"loss", ne.loss},
                        {"accuracy", ne.top1},
                        {"per_class", ne.per_class}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int do_sweep(const SweepArgs& a) {
  const int workers = worker_count_from_env();
  const Pipeline data =
      prepare_data({a.data_dir, a.split_seed, a.train_subset, a.val_subset});
  const std::vector<PollutionPlan> plans =
      build_plan_grid(a.fractions, a.specs, a.seeds);

  std::cerr << "sweep: " << plans.size() << " runs (" << a.fractions.size() << " fractions x "
            << a.specs.size() << " specs x " << a.seeds.size() << " seeds), " << workers
            << " worker(s)\n";
  const SweepReport report = run_sweep(plans, data, a.train, workers,
                                       [&plans](const RunRecord& rec) {
                                         std::cerr << "  run " << rec.run_id + 1 << "/"
                                                   << plans.size() << ": "
                                                   << to_string(rec.spec.type) << " "
                                                   << g9(rec.spec.param) << " fraction "
                                                   << g9(rec.fraction) << " seed " << rec.seed
                                                   << (rec.diverged ? " [diverged]" : "")
                                                   << "\n";
                                       });

  SweepMeta meta;
  meta.train = a.train;
  meta.fractions = a.fractions;
  meta.specs = a.specs;
  meta.seeds = a.seeds;
  meta.split_seed = a.split_seed;
  meta.train_subset = a.train_subset;
  meta.val_subset = a.val_subset;
  meta.data_dir = a.data_dir;
  meta.workers = workers;
  emit_report(report, meta, a.out_dir);

  int diverged = 0;
  for (const RunRecord& run : report.runs) diverged += run.diverged ? 1 : 0;
  std::cout << "wrote " << report.runs.size() << " runs (" << diverged << " diverged) in "
            << report.cells.size() << " cells to " << a.out_dir << "\n";
  return 0;
}

int do_report(const ReportArgs& a) {
  const fs::path runs_path = fs::path(a.runs_dir) / "runs.csv";
  if (!fs::exists(runs_path)) throw Error("no runs found in '" + a.runs_dir + "'");
  const std::vector<RunRecord> runs = parse_runs_csv(runs_path);
  if (runs.empty()) throw Error("no runs found in '" + runs_path.string() + "'");

  const std::vector<CellAggregate> cells = aggregate_runs(runs);
  const fs::path out =
      a.out_path.empty() ? fs::path(a.runs_dir) / "aggregate.csv" : fs::path(a.out_path);
  write_aggregate_csv(cells, out);
  std::cout << "aggregated " << runs.size() << " runs into " << cells.size() << " cells -> "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int run_command(const Command& cmd) {
  try {
    return std::visit(
        [](const auto& args) {
          using T = std::decay_t<decltype(args)>;
          if constexpr (std::is_same_v<T, CorruptArgs>) return do_corrupt(args);
          else if constexpr (std::is_same_v<T, TrainArgs>) return do_train(args);
          else if constexpr (std::is_same_v<T, EvaluateArgs>) return do_evaluate(args);
          else if constexpr (std::is_same_v<T, SweepArgs>) return do_sweep(args);
          else return do_report(args);
        },
        cmd);
  } catch (const DivergedError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  const ParseOutcome outcome = parse_args(args);
  if (!outcome.message.empty()) {
    std::ostream& stream = outcome.exit_code == 0 ? std::cout : std::cerr;
    stream << outcome.message;
    if (outcome.message.back() != '\n') stream << '\n';
  }
  if (!outcome.command) return outcome.exit_code;
  return run_command(*outcome.command);
}

}  // namespace noisebench
