#include "noisebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "noisebench/nn/checkpoint.hpp"
#include "noisebench/nn/loss.hpp"

namespace noisebench {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValueError("train config: epochs must be >= 1");
  if (train_batch < 1 || eval_batch < 1)
    throw ValueError("train config: batch sizes must be >= 1");
}

namespace {

using ArrXf = Eigen::Array<float, Eigen::Dynamic, 1>;

// Pack dataset rows [first, first+count) into a normalized [count,3,32,32]
// tensor.
nn::Tensor<float> make_eval_batch(const Dataset& data, std::size_t first, int count,
                                  const ChannelStats& stats) {
  nn::Tensor<float> x({count, kChannels, kImageSize, kImageSize});
  for (int r = 0; r < count; ++r) {
    const ArrXf values = normalize(data[first + r].image, stats);
    std::copy(values.data(), values.data() + kImageValues,
              x.data() + Eigen::Index(r) * kImageValues);
  }
  return x;
}

}  // namespace

EvalResult evaluate(nn::Model<float>& model, const Dataset& data, const ChannelStats& stats,
                    int eval_batch) {
  if (data.empty()) throw ValueError("evaluate: empty dataset");
  if (eval_batch < 1) throw ValueError("evaluate: batch size must be >= 1");

  double loss_sum = 0.0;
  std::array<std::int64_t, kClassCount> correct{}, total{};
  for (std::size_t start = 0; start < data.size(); start += eval_batch) {
    const int count = static_cast<int>(std::min<std::size_t>(eval_batch, data.size() - start));
    nn::Tensor<float> x = make_eval_batch(data, start, count, stats);
    std::vector<std::uint8_t> labels(count);
    for (int r = 0; r < count; ++r) labels[r] = data[start + r].label;

    nn::Tensor<float> logits = model.forward(x, /*training=*/false);
    loss_sum += nn::softmax_cross_entropy(logits, labels).loss * count;
    const std::vector<int> pred = nn::argmax_rows(logits);
    for (int r = 0; r < count; ++r) {
      ++total[labels[r]];
      if (pred[r] == labels[r]) ++correct[labels[r]];
    }
  }

  EvalResult res;
  res.loss = loss_sum / static_cast<double>(data.size());
  std::int64_t hits = 0;
  for (int k = 0; k < kClassCount; ++k) {
    hits += correct[k];
    res.per_class[k] = total[k] ? static_cast<double>(correct[k]) / total[k] : 0.0;
  }
  res.top1 = static_cast<double>(hits) / static_cast<double>(data.size());
  return res;
}

TrainResult train(const Dataset& train_data, const Dataset& val_data, const ChannelStats& stats,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.empty() || val_data.empty())
    throw ValueError("train: datasets must be non-empty");

  nn::Model<float> model(cfg.model);
  model.init_params(cfg.seed);
  nn::SgdOptimizer<float> opt(cfg.optim, model.params());

  RunMetrics metrics;
  nn::Snapshot<float> best_state;
  float best_val = std::numeric_limits<float>::infinity();

  const std::size_t n = train_data.size();
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng = substream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.train_batch) {
      const int count = static_cast<int>(std::min<std::size_t>(cfg.train_batch, n - start));
      nn::Tensor<float> x({count, kChannels, kImageSize, kImageSize});
      std::vector<std::uint8_t> labels(count);
      for (int r = 0; r < count; ++r) {
        const std::uint32_t idx = order[start + r];
        const LabeledExample& ex = train_data[idx];
        ArrXf values;
        if (cfg.augment) {
          RngStream arng = substream(cfg.seed, "augment",
                                     static_cast<std::uint64_t>(epoch) * n + idx);
          values = normalize(augment(ex.image, arng), stats);
        } else {
          values = normalize(ex.image, stats);
        }
        std::copy(values.data(), values.data() + kImageValues,
                  x.data() + Eigen::Index(r) * kImageValues);
        labels[r] = ex.label;
      }

      double batch_loss;
      try {
        nn::Tensor<float> logits = model.forward(x, /*training=*/true);
        nn::LossResult<float> loss = nn::softmax_cross_entropy(logits, labels);
        batch_loss = loss.loss;
        if (!std::isfinite(batch_loss))
          throw DivergedError(epoch, "training loss is non-finite at epoch " +
                                         std::to_string(epoch));
        model.backward(loss.dlogits);
      } catch (const NumericError&) {
        throw DivergedError(epoch,
                            "non-finite activations at epoch " + std::to_string(epoch));
      }
      opt.step();
      loss_sum += batch_loss * count;
    }
    metrics.train_loss.push_back(static_cast<float>(loss_sum / static_cast<double>(n)));

    EvalResult val;
    try {
      val = evaluate(model, val_data, stats, cfg.eval_batch);
    } catch (const NumericError&) {
      throw DivergedError(epoch,
                          "non-finite validation pass at epoch " + std::to_string(epoch));
    }
    if (!std::isfinite(val.loss))
      throw DivergedError(epoch,
                          "validation loss is non-finite at epoch " + std::to_string(epoch));
    const float vloss = static_cast<float>(val.loss);
    metrics.val_loss.push_back(vloss);
    metrics.val_acc.push_back(static_cast<float>(val.top1));

    if (vloss < best_val) {
      best_val = vloss;
      metrics.best_epoch = epoch;
      best_state = model.snapshot();
      if (!cfg.checkpoint_path.empty()) nn::save_checkpoint(cfg.checkpoint_path, model);
    }
  }

  model.restore(best_state);
  return TrainResult{std::move(model), std::move(metrics)};
}

Pipeline prepare_data(const PipelineConfig& cfg) {
  Pipeline p;
  {
    Dataset full = load_cifar_train(cfg.data_dir);
    SplitResult split = split_train_val(full, cfg.split_seed);
    p.stats = compute_channel_stats(split.train);
    p.train = std::move(split.train);
    p.validation = std::move(split.validation);
  }
  p.test = load_cifar_test(cfg.data_dir);

  auto take_subset = [&](Dataset& set, int subset, const char* tag) {
    if (subset <= 0) return;
    if (subset % kClassCount != 0)
      throw ValueError(std::string(tag) + " subset size must be a multiple of 10");
    set = stratified_subset(set, subset / kClassCount, stream_key(cfg.split_seed, tag, 0));
  };
  take_subset(p.train, cfg.train_subset, "train");
  take_subset(p.validation, cfg.val_subset, "validation");
  return p;
}

std::array<double, kAggFields> metric_fields(const RunMetrics& m) {
  std::array<double, kAggFields> f{};
  f[0] = m.best_epoch;
  f[1] = m.clean_loss;
  f[2] = m.clean_acc;
  f[3] = m.noisy_loss;
  f[4] = m.noisy_acc;
  for (int k = 0; k < kClassCount; ++k) f[5 + k] = m.per_class[k];
  return f;
}

const std::array<const char*, kAggFields> kMetricFieldNames = {
    "best_epoch", "clean_loss",  "clean_acc",   "noisy_loss",  "noisy_acc",
    "per_class_0", "per_class_1", "per_class_2", "per_class_3", "per_class_4",
    "per_class_5", "per_class_6", "per_class_7", "per_class_8", "per_class_9"};

namespace {

// One training shared by every plan with the same polluted train set. At
// fraction 0 pollution is a no-op, so plans differing only in spec collapse
// into a single job.
struct TrainJob {
  double fraction = 0.0;
  CorruptionSpec spec;
  std::uint64_t seed = 0;
  std::vector<std::size_t> plan_positions;
};

std::vector<TrainJob> group_plans(const std::vector<PollutionPlan>& plans) {
  std::vector<TrainJob> jobs;
  std::map<std::tuple<double, int, double, std::uint64_t>, std::size_t> index;
  for (std::size_t pos = 0; pos < plans.size(); ++pos) {
    const PollutionPlan& plan = plans[pos];
    const bool noop = plan.fraction == 0.0;
    const auto key = std::make_tuple(plan.fraction, noop ? -1 : static_cast<int>(plan.spec.type),
                                     noop ? 0.0 : plan.spec.param, plan.master_seed);
    auto [it, inserted] = index.emplace(key, jobs.size());
    if (inserted) jobs.push_back(TrainJob{plan.fraction, plan.spec, plan.master_seed, {}});
    jobs[it->second].plan_positions.push_back(pos);
  }
  return jobs;
}

void run_job(const TrainJob& job, const std::vector<PollutionPlan>& plans, const Pipeline& data,
             const TrainConfig& cfg_template, std::vector<RunRecord>& records) {
  TrainConfig cfg = cfg_template;
  cfg.seed = job.seed;

  for (std::size_t pos : job.plan_positions) {
    RunRecord& rec = records[pos];
    rec.run_id = static_cast<int>(pos);
    rec.spec = plans[pos].spec;
    rec.fraction = plans[pos].fraction;
    rec.seed = plans[pos].master_seed;
  }

  const Dataset* train_set = &data.train;
  PollutedDataset polluted;
  if (job.fraction > 0.0) {
    polluted = pollute(data.train, PollutionPlan{job.fraction, job.spec, job.seed});
    train_set = &polluted.data;
  }

  TrainResult trained = train(*train_set, data.validation, data.stats, cfg);

  const EvalResult clean = evaluate(trained.model, data.test, data.stats, cfg.eval_batch);
  for (std::size_t pos : job.plan_positions) {
    RunRecord& rec = records[pos];
    rec.metrics = trained.metrics;
    rec.metrics.clean_loss = static_cast<float>(clean.loss);
    rec.metrics.clean_acc = static_cast<float>(clean.top1);
    for (int k = 0; k < kClassCount; ++k)
      rec.metrics.per_class[k] = static_cast<float>(clean.per_class[k]);

    Dataset noisy = corrupt_test_set(data.test, rec.spec, rec.seed);
    const EvalResult ne = evaluate(trained.model, noisy, data.stats, cfg.eval_batch);
    rec.metrics.noisy_loss = static_cast<float>(ne.loss);
    rec.metrics.noisy_acc = static_cast<float>(ne.top1);
  }
}

void mark_diverged(const TrainJob& job, std::vector<RunRecord>& records, int epoch) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t pos : job.plan_positions) {
    RunRecord& rec = records[pos];
    rec.diverged = true;
    rec.diverged_epoch = epoch;
    rec.metrics.clean_loss = rec.metrics.clean_acc = nan;
    rec.metrics.noisy_loss = rec.metrics.noisy_acc = nan;
    rec.metrics.per_class.fill(nan);
    rec.metrics.best_epoch = -1;
  }
}

}  // namespace

SweepReport run_sweep(const std::vector<PollutionPlan>& plans, const Pipeline& data,
                      const TrainConfig& cfg_template, int worker_count,
                      const RunObserver& observer) {
  if (plans.empty()) throw ValueError("run_sweep: no plans");
  if (worker_count < 1) throw ValueError("run_sweep: worker count must be >= 1");
  cfg_template.validate();

  std::vector<TrainJob> jobs = group_plans(plans);
  SweepReport report;
  report.runs.resize(plans.size());

  std::mutex observer_mutex;
  auto execute = [&](const TrainJob& job) {
    try {
      run_job(job, plans, data, cfg_template, report.runs);
    } catch (const DivergedError& e) {
      mark_diverged(job, report.runs, e.epoch);
    }
    if (observer) {
      const std::lock_guard<std::mutex> lock(observer_mutex);
      for (std::size_t pos : job.plan_positions) observer(report.runs[pos]);
    }
  };

  if (worker_count == 1 || jobs.size() == 1) {
    for (const TrainJob& job : jobs) execute(job);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
        execute(jobs[i]);
    };
    const int n_threads = std::min<int>(worker_count, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  report.cells = aggregate_runs(report.runs);
  return report;
}

std::vector<CellAggregate> aggregate_runs(const std::vector<RunRecord>& runs) {
  std::vector<CellAggregate> cells;
  std::map<std::tuple<double, int, double>, std::size_t> index;
  for (const RunRecord& run : runs) {
    const auto key =
        std::make_tuple(run.fraction, static_cast<int>(run.spec.type), run.spec.param);
    auto [it, inserted] = index.emplace(key, cells.size());
    if (inserted) {
      CellAggregate cell;
      cell.spec = run.spec;
      cell.fraction = run.fraction;
      cells.push_back(cell);
    }
    ++cells[it->second].n_total;
  }

  for (CellAggregate& cell : cells) {
    std::vector<std::array<double, kAggFields>> samples;
    for (const RunRecord& run : runs) {
      if (run.diverged || run.fraction != cell.fraction || run.spec.type != cell.spec.type ||
          run.spec.param != cell.spec.param)
        continue;
      samples.push_back(metric_fields(run.metrics));
    }
    cell.n_used = static_cast<int>(samples.size());
    for (int f = 0; f < kAggFields; ++f) {
      double sum = 0.0;
      for (const auto& s : samples) sum += s[f];
      const double mean = cell.n_used ? sum / cell.n_used : 0.0;
      double sq = 0.0;
      for (const auto& s : samples) sq += (s[f] - mean) * (s[f] - mean);
      cell.mean[f] = mean;
      cell.stddev[f] = cell.n_used > 1 ? std::sqrt(sq / (cell.n_used - 1)) : 0.0;
    }
  }
  return cells;
}

int worker_count_from_env() {
  const char* raw = std::getenv("NOISEBENCH_WORKERS");
  if (raw == nullptr || *raw == '\0') return 1;
  int value = 0;
  const char* end = raw + std::strlen(raw);
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc{} || ptr != end || value < 1)
    throw ValueError("NOISEBENCH_WORKERS must be a positive integer, got '" + std::string(raw) +
                     "'");
  return value;
}

}  // namespace noisebench
