#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noisebench/corruption.hpp"
#include "noisebench/image.hpp"

namespace noisebench {

// Which fraction of a training set to corrupt, with what, and under which
// master seed. The seed alone determines the selected indices and every
// per-image noise realization.
struct PollutionPlan {
  double fraction = 0.0;
  CorruptionSpec spec;
  std::uint64_t master_seed = 0;
};

struct PollutedDataset {
  Dataset data;
  std::vector<std::uint32_t> corrupted_indices;  // sorted, unique
};

// Cartesian product: one plan per (fraction, spec, seed), fractions outermost.
std::vector<PollutionPlan> build_plan_grid(std::span<const double> fractions,
                                           std::span<const CorruptionSpec> specs,
                                           std::span<const std::uint64_t> seeds);

// round-half-up(fraction*n) distinct indices drawn uniformly; a pure function
// of (n, fraction, master_seed) -- in particular independent of the spec, so
// the same seed selects the same samples across noise types.
std::vector<std::uint32_t> select_corrupted_indices(std::size_t dataset_size, double fraction,
                                                    std::uint64_t master_seed);

// Replace the selected images by their corrupted versions; order, labels and
// unselected images are untouched.
PollutedDataset pollute(const Dataset& train, const PollutionPlan& plan);

// Corrupt every image with a per-image substream of the seed.
Dataset corrupt_test_set(const Dataset& test, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace noisebench
