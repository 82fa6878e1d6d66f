#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "noisebench/image.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {

// One CIFAR-10 record: label byte, 1024 red, 1024 green, 1024 blue bytes.
inline constexpr std::size_t kRecordBytes = 1 + kImageValues;

std::vector<LabeledExample> parse_batch(std::span<const std::uint8_t> bytes);

// Inverse of parse_batch; intensities re-quantized by round(255*x).
std::vector<std::uint8_t> serialize_batch(const std::vector<LabeledExample>& examples);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// data_batch_1.bin .. data_batch_5.bin, 50000 examples total.
Dataset load_cifar_train(const std::filesystem::path& dir);
// test_batch.bin, 10000 examples.
Dataset load_cifar_test(const std::filesystem::path& dir);

inline constexpr int kTrainBatchFiles = 5;
std::filesystem::path train_batch_path(const std::filesystem::path& dir, int index);

struct SplitResult {
  Dataset train;       // 45000
  Dataset validation;  // 5000, exactly 500 per class
};

// Disjoint partition of the 50000-example train set; validation is
// class-stratified and the partition is a pure function of the seed.
SplitResult split_train_val(const Dataset& full_train, std::uint64_t seed);

// Mean and population std per channel over every pixel, single pass.
ChannelStats compute_channel_stats(const Dataset& data);

// (x - mean) / std per channel; the result is unbounded, so it is returned as
// a raw value block in record order rather than as an image.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> normalize(const ImageT<Scalar>& image,
                                                  const ChannelStats& stats) {
  for (double s : stats.std)
    if (!(s > 0.0)) throw ValueError("normalize: channel std must be positive");
  Eigen::Array<Scalar, Eigen::Dynamic, 1> out(kImageValues);
  for (int c = 0; c < kChannels; ++c) {
    out.segment(c * kPlanePixels, kPlanePixels) =
        (image.values.segment(c * kPlanePixels, kPlanePixels) -
         static_cast<Scalar>(stats.mean[c])) /
        static_cast<Scalar>(stats.std[c]);
  }
  return out;
}

template <typename Scalar>
ImageT<Scalar> denormalize(const Eigen::Array<Scalar, Eigen::Dynamic, 1>& values,
                           const ChannelStats& stats) {
  if (values.size() != kImageValues) throw ShapeError("denormalize: expected 3072 values");
  ImageT<Scalar> out;
  for (int c = 0; c < kChannels; ++c) {
    out.values.segment(c * kPlanePixels, kPlanePixels) =
        values.segment(c * kPlanePixels, kPlanePixels) * static_cast<Scalar>(stats.std[c]) +
        static_cast<Scalar>(stats.mean[c]);
  }
  return out;
}

// Pad 4 zero pixels per side, crop the 32x32 window whose top-left corner in
// padded coordinates is (dy,dx) in [0,8]^2, then optionally mirror columns.
Image crop_and_flip(const Image& image, int dy, int dx, bool flip);

// Train-time augmentation: uniform crop offset, then flip with probability 1/2.
// Draw order: dy, dx, flip.
Image augment(const Image& image, RngStream& rng);

// Deterministic class-stratified subset, per_class examples from each class,
// returned in original dataset order.
Dataset stratified_subset(const Dataset& data, int per_class, std::uint64_t seed);

}  // namespace noisebench
