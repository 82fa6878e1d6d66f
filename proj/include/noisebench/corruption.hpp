#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "noisebench/image.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {

enum class NoiseType { gaussian, salt_pepper, blur };
enum class Severity { mild, moderate, strong };

const char* to_string(NoiseType type);
const char* to_string(Severity level);
NoiseType noise_type_from_string(const std::string& name);
Severity severity_from_string(const std::string& name);

// One corruption operator with its severity parameter:
// gaussian sigma | salt-pepper total density | blur sigma.
struct CorruptionSpec {
  NoiseType type = NoiseType::gaussian;
  double param = 0.0;

  static CorruptionSpec make_gaussian(double sigma);
  static CorruptionSpec make_salt_pepper(double p_total);
  static CorruptionSpec make_blur(double sigma_blur);
};

// mild/moderate/strong parameter per noise type
CorruptionSpec preset(NoiseType type, Severity level);

// Symmetric 1-D factor of the blur kernel; taps sum to 1.
struct BlurKernel {
  Eigen::ArrayXd taps;  // index k -> taps[k + radius]
  int radius = 0;
};

BlurKernel gaussian_kernel(double sigma_blur);

namespace detail {
// reflect-101: mirror about the edge pixel without repeating it
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}
}  // namespace detail

// i.i.d. zero-mean gaussian perturbation per value, clipped back to [0,1].
template <typename Scalar>
ImageT<Scalar> gaussian_noise(const ImageT<Scalar>& image, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ValueError("gaussian_noise: sigma must be >= 0");
  ImageT<Scalar> out = image;
  if (sigma == 0.0) return out;
  for (int i = 0; i < kImageValues; ++i) {
    double v = static_cast<double>(out.values[i]) + sigma * rng.next_gaussian();
    out.values[i] = static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

// Impulse noise: per pixel location, pepper (all channels 0) with probability
// p/2, salt (all channels 1) with probability p/2. One uniform draw per
// location, row-major.
template <typename Scalar>
ImageT<Scalar> salt_pepper(const ImageT<Scalar>& image, double p_total, RngStream& rng) {
  if (p_total < 0.0 || p_total > 1.0)
    throw ValueError("salt_pepper: p_total must lie in [0,1]");
  ImageT<Scalar> out = image;
  if (p_total == 0.0) return out;
  for (int p = 0; p < kPlanePixels; ++p) {
    const double u = rng.next_double();
    if (u < 0.5 * p_total) {
      for (int c = 0; c < kChannels; ++c) out.values[c * kPlanePixels + p] = Scalar(0);
    } else if (u < p_total) {
      for (int c = 0; c < kChannels; ++c) out.values[c * kPlanePixels + p] = Scalar(1);
    }
  }
  return out;
}

// Separable convolution with the gaussian kernel, horizontal pass then
// vertical pass, reflect-101 borders. Deterministic; accumulates in double.
template <typename Scalar>
ImageT<Scalar> gaussian_blur(const ImageT<Scalar>& image, double sigma_blur) {
  const BlurKernel kernel = gaussian_kernel(sigma_blur);
  const int r = kernel.radius;
  ImageT<Scalar> out;
  Eigen::Array<double, kImageSize, kImageSize> tmp;
  for (int c = 0; c < kChannels; ++c) {
    auto src = image.plane(c);
    for (int i = 0; i < kImageSize; ++i) {
      for (int j = 0; j < kImageSize; ++j) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k)
          acc += kernel.taps[k + r] *
                 static_cast<double>(src(i, detail::reflect_index(j + k, kImageSize)));
        tmp(i, j) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int i = 0; i < kImageSize; ++i) {
      for (int j = 0; j < kImageSize; ++j) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k)
          acc += kernel.taps[k + r] * tmp(detail::reflect_index(i + k, kImageSize), j);
        dst(i, j) = static_cast<Scalar>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

// Dispatch over the three operators; blur ignores the stream.
template <typename Scalar>
ImageT<Scalar> apply(const CorruptionSpec& spec, const ImageT<Scalar>& image, RngStream& rng) {
  switch (spec.type) {
    case NoiseType::gaussian:
      return gaussian_noise(image, spec.param, rng);
    case NoiseType::salt_pepper:
      return salt_pepper(image, spec.param, rng);
    case NoiseType::blur:
      return gaussian_blur(image, spec.param);
  }
  throw ValueError("apply: unknown noise type");
}

}  // namespace noisebench
