#include "noisebench/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "noisebench/cifar_io.hpp"
#include "noisebench/error.hpp"

namespace noisebench {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Balanced label sequence (per_class copies of each class), Fisher-Yates
// shuffled so batches are class-mixed the way the real corpus is.
std::vector<std::uint8_t> shuffled_labels(int per_class, RngStream rng) {
  std::vector<std::uint8_t> labels;
  labels.reserve(static_cast<std::size_t>(per_class) * kClassCount);
  for (int k = 0; k < kClassCount; ++k)
    labels.insert(labels.end(), static_cast<std::size_t>(per_class),
                  static_cast<std::uint8_t>(k));
  for (std::size_t i = labels.size(); i > 1; --i)
    std::swap(labels[i - 1], labels[rng.next_below(i)]);
  return labels;
}

const char* order_tag(DatasetRole role) {
  return role == DatasetRole::test ? "synth-test-order" : "synth-train-order";
}

const char* image_tag(DatasetRole role) {
  return role == DatasetRole::test ? "synth-test-image" : "synth-train-image";
}

std::vector<LabeledExample> make_examples(int per_class, std::uint64_t seed,
                                          DatasetRole role) {
  if (per_class <= 0) throw ValueError("synthetic corpus: per_class must be positive");
  const auto labels = shuffled_labels(per_class, substream(seed, order_tag(role), 0));
  std::vector<LabeledExample> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    RngStream rng = substream(seed, image_tag(role), static_cast<std::uint64_t>(i));
    out[i].label = labels[i];
    out[i].image = make_synth_image(labels[i], rng);
  }
  return out;
}

}  // namespace

Image make_synth_image(int klass, RngStream& rng) {
  if (klass < 0 || klass >= kClassCount)
    throw ValueError("synthetic corpus: class out of range");

  const double theta = std::numbers::pi * klass / kClassCount;
  const double freq = 3.0 + klass % 3;  // grating cycles across the image
  const double phase = rng.next_double() * kTwoPi;
  const double cx = 16.0 + (rng.next_double() * 6.0 - 3.0);
  const double cy = 16.0 + (rng.next_double() * 6.0 - 3.0);
  const double blob_sigma = 6.0 + rng.next_double() * 4.0;
  const double bg_angle = rng.next_double() * kTwoPi;
  const double bg_amp = 0.05 + rng.next_double() * 0.10;
  const double base = 0.35 + rng.next_double() * 0.20;

  const double ct = std::cos(theta), st = std::sin(theta);
  const double cb = std::cos(bg_angle), sb = std::sin(bg_angle);
  double mix[kChannels];
  for (int c = 0; c < kChannels; ++c)
    mix[c] = 0.5 + 0.5 * std::cos(kTwoPi * klass / kClassCount + kTwoPi * c / 3.0);

  Image img;
  for (int c = 0; c < kChannels; ++c) {
    for (int y = 0; y < kImageSize; ++y) {
      for (int x = 0; x < kImageSize; ++x) {
        const double xr = x - 16.0, yr = y - 16.0;
        const double grating =
            std::sin(kTwoPi * freq * (xr * ct + yr * st) / kImageSize + phase);
        const double mask =
            std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                     (2.0 * blob_sigma * blob_sigma));
        const double background = bg_amp * (xr * cb + yr * sb) / 16.0;
        const double noise = rng.next_double() * 0.08 - 0.04;
        const double v = base + background + 0.45 * mix[c] * grating * mask + noise;
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

Dataset make_synth_dataset(int per_class, std::uint64_t seed, DatasetRole role) {
  return Dataset{make_examples(per_class, seed, role), role};
}

void write_synth_corpus(const std::string& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const auto train = make_examples(5000, seed, DatasetRole::train);
  constexpr std::size_t kBatchRecords = 10000;
  for (int b = 0; b < 5; ++b) {
    std::vector<LabeledExample> batch(train.begin() + b * kBatchRecords,
                                      train.begin() + (b + 1) * kBatchRecords);
    write_file(train_batch_path(dir, b), serialize_batch(batch));
  }

  const auto test = make_examples(1000, seed, DatasetRole::test);
  write_file((fs::path(dir) / "test_batch.bin").string(), serialize_batch(test));
}

bool ensure_synth_corpus(const std::string& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path marker = fs::path(dir) / ".synth-complete";
  if (fs::exists(marker)) return false;
  write_synth_corpus(dir, seed);
  std::ofstream(marker.string()) << "seed " << seed << "\n";
  return true;
}

}  // namespace noisebench
