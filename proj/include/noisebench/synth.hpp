#pragma once

#include <cstdint>
#include <string>

#include "noisebench/image.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {

// Procedurally generated image corpus in the same binary layout the CIFAR-10
// loader reads (five 10000-record training batches plus one test batch, ten
// balanced classes). Each class is an oriented sinusoidal grating with a
// class-specific orientation, spatial frequency, and channel color mix,
// windowed by a Gaussian blob over a randomized background. The recipe keeps
// classes separable by a small convolutional network while remaining
// sensitive to additive noise, impulse noise, and blur.
Image make_synth_image(int klass, RngStream& rng);

// In-memory balanced dataset of per_class examples per class, shuffled order.
Dataset make_synth_dataset(int per_class, std::uint64_t seed, DatasetRole role);

// Write the full corpus (50000 train / 10000 test records) under dir.
void write_synth_corpus(const std::string& dir, std::uint64_t seed);

// Generate the corpus only if the completion marker is absent. Returns true
// when this call produced the files.
bool ensure_synth_corpus(const std::string& dir, std::uint64_t seed);

}  // namespace noisebench
