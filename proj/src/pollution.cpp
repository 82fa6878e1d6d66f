#include "noisebench/pollution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "noisebench/rng.hpp"

namespace noisebench {

std::vector<PollutionPlan> build_plan_grid(std::span<const double> fractions,
                                           std::span<const CorruptionSpec> specs,
                                           std::span<const std::uint64_t> seeds) {
  if (fractions.empty()) throw ValueError("build_plan_grid: no fractions");
  if (specs.empty()) throw ValueError("build_plan_grid: no specs");
  if (seeds.empty()) throw ValueError("build_plan_grid: no seeds");
  for (double f : fractions)
    if (f < 0.0 || f > 1.0)
      throw ValueError("build_plan_grid: fraction " + std::to_string(f) +
                       " outside [0,1]");
  std::vector<PollutionPlan> plans;
  plans.reserve(fractions.size() * specs.size() * seeds.size());
  for (double f : fractions)
    for (const CorruptionSpec& s : specs)
      for (std::uint64_t seed : seeds) plans.push_back({f, s, seed});
  return plans;
}

std::vector<std::uint32_t> select_corrupted_indices(std::size_t dataset_size, double fraction,
                                                    std::uint64_t master_seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ValueError("select_corrupted_indices: fraction outside [0,1]");
  const auto n = static_cast<std::uint32_t>(dataset_size);
  auto count = static_cast<std::uint32_t>(
      std::floor(fraction * static_cast<double>(n) + 0.5));
  count = std::min(count, n);

  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  RngStream rng = substream(master_seed, "pollute-select");
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t j = k + rng.next_below(n - k);
    std::swap(pool[k], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

PollutedDataset pollute(const Dataset& train, const PollutionPlan& plan) {
  PollutedDataset out;
  out.data = train;
  out.corrupted_indices =
      select_corrupted_indices(train.size(), plan.fraction, plan.master_seed);
  for (std::uint32_t idx : out.corrupted_indices) {
    RngStream rng = substream(plan.master_seed, "pollute-image", idx);
    out.data[idx].image = apply(plan.spec, train[idx].image, rng);
  }
  return out;
}

Dataset corrupt_test_set(const Dataset& test, const CorruptionSpec& spec, std::uint64_t seed) {
  Dataset out;
  out.role = test.role;
  out.examples.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    RngStream rng = substream(seed, "test-image", i);
    out.examples[i].label = test[i].label;
    out.examples[i].image = apply(spec, test[i].image, rng);
  }
  return out;
}

}  // namespace noisebench
