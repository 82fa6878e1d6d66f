#include "noisebench/corruption.hpp"

namespace noisebench {

const char* to_string(NoiseType type) {
  switch (type) {
    case NoiseType::gaussian:
      return "gaussian";
    case NoiseType::salt_pepper:
      return "salt-pepper";
    case NoiseType::blur:
      return "blur";
  }
  return "?";
}

const char* to_string(Severity level) {
  switch (level) {
    case Severity::mild:
      return "mild";
    case Severity::moderate:
      return "moderate";
    case Severity::strong:
      return "strong";
  }
  return "?";
}

NoiseType noise_type_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseType::gaussian;
  if (name == "salt-pepper" || name == "salt_pepper") return NoiseType::salt_pepper;
  if (name == "blur") return NoiseType::blur;
  throw ValueError("unknown noise type '" + name + "' (gaussian|salt-pepper|blur)");
}

Severity severity_from_string(const std::string& name) {
  if (name == "mild") return Severity::mild;
  if (name == "moderate") return Severity::moderate;
  if (name == "strong") return Severity::strong;
  throw ValueError("unknown severity '" + name + "' (mild|moderate|strong)");
}

CorruptionSpec CorruptionSpec::make_gaussian(double sigma) {
  if (!(sigma > 0.0)) throw ValueError("gaussian noise: sigma must be > 0");
  return {NoiseType::gaussian, sigma};
}

CorruptionSpec CorruptionSpec::make_salt_pepper(double p_total) {
  if (!(p_total > 0.0) || p_total > 1.0)
    throw ValueError("salt-pepper: p_total must lie in (0,1]");
  return {NoiseType::salt_pepper, p_total};
}

CorruptionSpec CorruptionSpec::make_blur(double sigma_blur) {
  if (!(sigma_blur > 0.0)) throw ValueError("blur: sigma must be > 0");
  return {NoiseType::blur, sigma_blur};
}

CorruptionSpec preset(NoiseType type, Severity level) {
  const int l = static_cast<int>(level);
  switch (type) {
    case NoiseType::gaussian: {
      constexpr double sigma[] = {0.1, 0.3, 0.5};
      return CorruptionSpec::make_gaussian(sigma[l]);
    }
    case NoiseType::salt_pepper: {
      constexpr double p[] = {0.05, 0.1, 0.2};
      return CorruptionSpec::make_salt_pepper(p[l]);
    }
    case NoiseType::blur: {
      constexpr double sigma[] = {0.5, 1.0, 2.0};
      return CorruptionSpec::make_blur(sigma[l]);
    }
  }
  throw ValueError("preset: unknown noise type");
}

BlurKernel gaussian_kernel(double sigma_blur) {
  if (!(sigma_blur > 0.0)) throw ValueError("gaussian_kernel: sigma must be > 0");
  BlurKernel kernel;
  kernel.radius = static_cast<int>(std::ceil(3.0 * sigma_blur));
  kernel.taps.resize(2 * kernel.radius + 1);
  for (int k = -kernel.radius; k <= kernel.radius; ++k)
    kernel.taps[k + kernel.radius] =
        std::exp(-0.5 * (double(k) * k) / (sigma_blur * sigma_blur));
  kernel.taps /= kernel.taps.sum();
  return kernel;
}

}  // namespace noisebench
