#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "noisebench/cifar_io.hpp"
#include "noisebench/nn/model.hpp"
#include "noisebench/nn/optim.hpp"
#include "noisebench/pollution.hpp"

namespace noisebench {

struct TrainConfig {
  nn::ModelKind model = nn::ModelKind::smallcnn;
  int epochs = 100;
  int train_batch = 128;
  int eval_batch = 100;
  nn::OptimConfig optim{};
  std::uint64_t seed = 0;
  bool augment = true;
  std::string checkpoint_path;  // when set, saved at every new best epoch

  void validate() const;
};

struct EvalResult {
  double loss = 0.0;
  double top1 = 0.0;
  std::array<double, kClassCount> per_class{};
};

// Full curves plus the final evaluations of the best snapshot.
struct RunMetrics {
  std::vector<float> train_loss;  // one entry per epoch
  std::vector<float> val_loss;
  std::vector<float> val_acc;
  int best_epoch = 0;             // earliest epoch attaining the minimum val loss
  float clean_loss = 0.f;
  float clean_acc = 0.f;
  float noisy_loss = 0.f;
  float noisy_acc = 0.f;
  std::array<float, kClassCount> per_class{};  // clean-test accuracy by class
};

struct TrainResult {
  nn::Model<float> model;  // restored to the best-validation-loss snapshot
  RunMetrics metrics;      // test fields not yet filled in
};

// Mean cross-entropy, top-1 accuracy, and per-class accuracy in evaluation
// mode. No augmentation; inputs are normalized with the supplied stats.
EvalResult evaluate(nn::Model<float>& model, const Dataset& data, const ChannelStats& stats,
                    int eval_batch);

// Mini-batch SGD with a seeded shuffle and per-epoch augmentation; after each
// epoch the model is scored on the validation set and snapshotted whenever
// validation loss improves (earliest epoch kept on ties). Throws DivergedError
// when any loss turns non-finite.
TrainResult train(const Dataset& train_data, const Dataset& val_data, const ChannelStats& stats,
                  const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Data pipeline: load, split, optionally subsample.

struct PipelineConfig {
  std::filesystem::path data_dir;
  std::uint64_t split_seed = 0;
  int train_subset = 0;  // 0 keeps the full 45000-image split
  int val_subset = 0;    // 0 keeps the full 5000-image split
};

struct Pipeline {
  Dataset train;
  Dataset validation;
  Dataset test;
  ChannelStats stats;  // computed on the full clean train split, pre-subset
};

Pipeline prepare_data(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Sweep over a pollution grid.

struct RunRecord {
  int run_id = 0;  // position in the plan grid
  CorruptionSpec spec;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  bool diverged = false;
  int diverged_epoch = -1;
};

// The scalar columns aggregated per grid cell, in CSV order.
inline constexpr int kAggFields = 5 + kClassCount;
std::array<double, kAggFields> metric_fields(const RunMetrics& m);
extern const std::array<const char*, kAggFields> kMetricFieldNames;

struct CellAggregate {
  CorruptionSpec spec;
  double fraction = 0.0;
  int n_total = 0;     // seeds attempted
  int n_used = 0;      // non-diverged runs entering mean/std
  std::array<double, kAggFields> mean{};
  std::array<double, kAggFields> stddev{};  // sample std (n-1); 0 when n_used < 2
};

struct SweepReport {
  std::vector<RunRecord> runs;    // ordered by run_id
  std::vector<CellAggregate> cells;  // grid order: fractions outermost, then specs
};

// Called after each run completes (any thread, serialized), for progress only.
using RunObserver = std::function<void(const RunRecord&)>;

// Train/evaluate every plan against the pipeline's data. Every run trains on
// the (polluted) train split and is evaluated on the clean test set and on the
// fully corrupted test set (same spec, seeded per run). Diverged runs are
// recorded, not fatal. Fraction-0 plans share one training per seed since
// pollution is a no-op there. worker_count > 1 runs plans on a thread pool;
// results are identical to the sequential order.
SweepReport run_sweep(const std::vector<PollutionPlan>& plans, const Pipeline& data,
                      const TrainConfig& cfg_template, int worker_count = 1,
                      const RunObserver& observer = {});

// Aggregate per-run records into grid cells (exposed for re-aggregation).
std::vector<CellAggregate> aggregate_runs(const std::vector<RunRecord>& runs);

// Worker count from NOISEBENCH_WORKERS, default 1.
int worker_count_from_env();

}  // namespace noisebench
