#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "noisebench/error.hpp"

namespace noisebench {

inline constexpr int kChannels = 3;
inline constexpr int kImageSize = 32;
inline constexpr int kPlanePixels = kImageSize * kImageSize;
inline constexpr int kImageValues = kChannels * kPlanePixels;
inline constexpr int kClassCount = 10;

inline constexpr std::array<const char*, kClassCount> kClassNames = {
    "plane", "car", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};

template <typename Scalar>
using Plane = Eigen::Array<Scalar, kImageSize, kImageSize, Eigen::RowMajor>;
template <typename Scalar>
using PlaneMap = Eigen::Map<Plane<Scalar>>;
template <typename Scalar>
using ConstPlaneMap = Eigen::Map<const Plane<Scalar>>;

// 3x32x32 grid of intensities in [0,1], stored channel-major and row-major
// within a channel -- the same value order as one CIFAR-10 record.
template <typename Scalar>
struct ImageT {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values =
      Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(kImageValues);

  Scalar& at(int c, int i, int j) { return values[c * kPlanePixels + i * kImageSize + j]; }
  Scalar at(int c, int i, int j) const {
    return values[c * kPlanePixels + i * kImageSize + j];
  }

  PlaneMap<Scalar> plane(int c) { return PlaneMap<Scalar>(values.data() + c * kPlanePixels); }
  ConstPlaneMap<Scalar> plane(int c) const {
    return ConstPlaneMap<Scalar>(values.data() + c * kPlanePixels);
  }

  template <typename Other>
  ImageT<Other> cast() const {
    ImageT<Other> out;
    out.values = values.template cast<Other>();
    return out;
  }
};

using Image = ImageT<float>;

struct LabeledExample {
  Image image;
  std::uint8_t label = 0;
};

enum class DatasetRole { train, validation, test };

struct Dataset {
  std::vector<LabeledExample> examples;
  DatasetRole role = DatasetRole::train;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  const LabeledExample& operator[](std::size_t i) const { return examples[i]; }
  LabeledExample& operator[](std::size_t i) { return examples[i]; }
};

// Per-channel mean and population standard deviation on the unit scale.
struct ChannelStats {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> std{};
};

}  // namespace noisebench
