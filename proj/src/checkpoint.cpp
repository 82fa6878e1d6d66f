#include "noisebench/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "noisebench/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace noisebench::nn {

namespace {

constexpr char kMagic[8] = {'N', 'B', 'C', 'K', 'P', 'T', '0', '1'};

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_scalar(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw IoError(std::string("checkpoint: truncated while reading ") + what);
}

template <typename T>
T read_scalar(std::istream& in, const char* what) {
  T v{};
  read_bytes(in, &v, sizeof(T), what);
  return v;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::uint64_t config_digest(Model<float>& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const char* kind = to_string(model.kind());
  h = fnv1a(h, kind, std::strlen(kind));
  for (auto& [name, tensor] : model.state()) {
    h = fnv1a(h, name.data(), name.size());
    for (int d : tensor->shape()) {
      const std::uint32_t dim = static_cast<std::uint32_t>(d);
      h = fnv1a(h, &dim, sizeof(dim));
    }
  }
  return h;
}

void save_checkpoint(const std::string& path, Model<float>& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  auto entries = model.state();
  write_bytes(out, kMagic, sizeof(kMagic));
  write_scalar<std::uint64_t>(out, config_digest(model));
  write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (auto& [name, tensor] : entries) {
    write_scalar<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_scalar<std::uint8_t>(out, static_cast<std::uint8_t>(tensor->rank()));
    for (int d : tensor->shape()) write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (auto& [name, tensor] : entries)
    write_bytes(out, tensor->data(), sizeof(float) * static_cast<std::size_t>(tensor->size()));

  out.flush();
  if (!out) throw IoError("short write to '" + path + "'");
}

void load_checkpoint(const std::string& path, Model<float>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  char magic[sizeof(kMagic)];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("'" + path + "' is not a checkpoint file");

  const auto digest = read_scalar<std::uint64_t>(in, "config digest");
  if (digest != config_digest(model))
    throw IoError("'" + path + "' was written for a different model configuration");

  auto entries = model.state();
  const auto count = read_scalar<std::uint32_t>(in, "entry count");
  if (count != entries.size())
    throw IoError("checkpoint entry count mismatch in '" + path + "'");

  for (auto& [name, tensor] : entries) {
    const auto name_len = read_scalar<std::uint16_t>(in, "entry name length");
    std::string stored(name_len, '\0');
    read_bytes(in, stored.data(), name_len, "entry name");
    if (stored != name)
      throw IoError("checkpoint entry '" + stored + "' does not match expected '" + name + "'");
    const auto rank = read_scalar<std::uint8_t>(in, "entry rank");
    if (rank != tensor->rank())
      throw IoError("checkpoint rank mismatch for '" + name + "'");
    for (int d : tensor->shape()) {
      const auto dim = read_scalar<std::uint32_t>(in, "entry shape");
      if (dim != static_cast<std::uint32_t>(d))
        throw IoError("checkpoint shape mismatch for '" + name + "'");
    }
  }
  for (auto& [name, tensor] : entries)
    read_bytes(in, tensor->data(), sizeof(float) * static_cast<std::size_t>(tensor->size()),
               name.c_str());
}

}  // namespace noisebench::nn
