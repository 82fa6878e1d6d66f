#pragma once

#include <cstdint>
#include <string>

#include "noisebench/nn/model.hpp"

namespace noisebench::nn {

// Versioned binary parameter container: magic bytes, a digest of the model
// configuration, a name/shape table, then raw little-endian 32-bit values for
// every state tensor (parameters and batch-norm buffers).
std::uint64_t config_digest(Model<float>& model);
void save_checkpoint(const std::string& path, Model<float>& model);
void load_checkpoint(const std::string& path, Model<float>& model);

}  // namespace noisebench::nn
