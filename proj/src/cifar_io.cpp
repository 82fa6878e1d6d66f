#include "noisebench/cifar_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace noisebench {

std::vector<LabeledExample> parse_batch(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kRecordBytes != 0)
    throw ParseError("malformed batch: size " + std::to_string(bytes.size()) +
                     " is not a multiple of " + std::to_string(kRecordBytes));
  const std::size_t count = bytes.size() / kRecordBytes;
  std::vector<LabeledExample> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kRecordBytes;
    if (rec[0] >= kClassCount)
      throw ParseError("invalid label " + std::to_string(int(rec[0])) + " in record " +
                       std::to_string(r));
    out[r].label = rec[0];
    float* dst = out[r].image.values.data();
    for (int i = 0; i < kImageValues; ++i) dst[i] = static_cast<float>(rec[1 + i]) / 255.0f;
  }
  return out;
}

std::vector<std::uint8_t> serialize_batch(const std::vector<LabeledExample>& examples) {
  std::vector<std::uint8_t> out(examples.size() * kRecordBytes);
  for (std::size_t r = 0; r < examples.size(); ++r) {
    std::uint8_t* rec = out.data() + r * kRecordBytes;
    rec[0] = examples[r].label;
    const float* src = examples[r].image.values.data();
    for (int i = 0; i < kImageValues; ++i) {
      long q = std::lround(255.0 * static_cast<double>(src[i]));
      rec[1 + i] = static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

std::filesystem::path train_batch_path(const std::filesystem::path& dir, int index) {
  return dir / ("data_batch_" + std::to_string(index + 1) + ".bin");
}

Dataset load_cifar_train(const std::filesystem::path& dir) {
  Dataset out;
  out.role = DatasetRole::train;
  for (int b = 0; b < kTrainBatchFiles; ++b) {
    auto batch = parse_batch(read_file(train_batch_path(dir, b)));
    out.examples.insert(out.examples.end(), std::make_move_iterator(batch.begin()),
                        std::make_move_iterator(batch.end()));
  }
  if (out.size() != 50000)
    throw ParseError("train set has " + std::to_string(out.size()) +
                     " examples, expected 50000");
  return out;
}

Dataset load_cifar_test(const std::filesystem::path& dir) {
  Dataset out;
  out.role = DatasetRole::test;
  out.examples = parse_batch(read_file(dir / "test_batch.bin"));
  if (out.size() != 10000)
    throw ParseError("test set has " + std::to_string(out.size()) + " examples, expected 10000");
  return out;
}

SplitResult split_train_val(const Dataset& full_train, std::uint64_t seed) {
  if (full_train.size() != 50000)
    throw ValueError("split_train_val: expected 50000 examples, got " +
                     std::to_string(full_train.size()));
  constexpr int kValPerClass = 5000 / kClassCount;

  std::array<std::vector<std::uint32_t>, kClassCount> by_class;
  for (std::uint32_t i = 0; i < full_train.size(); ++i)
    by_class[full_train[i].label].push_back(i);

  std::vector<char> in_val(full_train.size(), 0);
  for (int c = 0; c < kClassCount; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < kValPerClass)
      throw ValueError("split_train_val: class " + std::to_string(c) + " has only " +
                       std::to_string(idx.size()) + " examples");
    RngStream rng = substream(seed, "split", static_cast<std::uint64_t>(c));
    // partial Fisher-Yates: the first kValPerClass entries become validation
    for (int k = 0; k < kValPerClass; ++k) {
      std::uint32_t j = k + rng.next_below(static_cast<std::uint32_t>(idx.size() - k));
      std::swap(idx[k], idx[j]);
      in_val[idx[k]] = 1;
    }
  }

  SplitResult res;
  res.train.role = DatasetRole::train;
  res.validation.role = DatasetRole::validation;
  res.train.examples.reserve(45000);
  res.validation.examples.reserve(5000);
  for (std::size_t i = 0; i < full_train.size(); ++i)
    (in_val[i] ? res.validation : res.train).examples.push_back(full_train[i]);
  return res;
}

ChannelStats compute_channel_stats(const Dataset& data) {
  if (data.empty()) throw ValueError("compute_channel_stats: empty dataset");
  std::array<double, kChannels> sum{}, sumsq{};
  for (const auto& ex : data.examples) {
    for (int c = 0; c < kChannels; ++c) {
      auto seg =
          ex.image.values.segment(c * kPlanePixels, kPlanePixels).cast<double>();
      sum[c] += seg.sum();
      sumsq[c] += seg.square().sum();
    }
  }
  const double n = static_cast<double>(data.size()) * kPlanePixels;
  ChannelStats stats;
  for (int c = 0; c < kChannels; ++c) {
    stats.mean[c] = sum[c] / n;
    double var = sumsq[c] / n - stats.mean[c] * stats.mean[c];
    stats.std[c] = std::sqrt(std::max(var, 0.0));
    if (stats.std[c] <= 1e-12)
      throw ValueError("compute_channel_stats: degenerate std in channel " + std::to_string(c));
  }
  return stats;
}

Image crop_and_flip(const Image& image, int dy, int dx, bool flip) {
  constexpr int kPad = 4;
  if (dy < 0 || dy > 2 * kPad || dx < 0 || dx > 2 * kPad)
    throw ValueError("crop offset out of range");
  Image out;
  for (int c = 0; c < kChannels; ++c) {
    for (int i = 0; i < kImageSize; ++i) {
      const int src_i = dy + i - kPad;
      if (src_i < 0 || src_i >= kImageSize) continue;  // zero padding row
      for (int j = 0; j < kImageSize; ++j) {
        const int src_j = dx + j - kPad;
        if (src_j < 0 || src_j >= kImageSize) continue;
        const int dst_j = flip ? kImageSize - 1 - j : j;
        out.at(c, i, dst_j) = image.at(c, src_i, src_j);
      }
    }
  }
  return out;
}

Image augment(const Image& image, RngStream& rng) {
  const int dy = static_cast<int>(rng.next_below(9));
  const int dx = static_cast<int>(rng.next_below(9));
  const bool flip = rng.next_bool();
  return crop_and_flip(image, dy, dx, flip);
}

Dataset stratified_subset(const Dataset& data, int per_class, std::uint64_t seed) {
  if (per_class <= 0) throw ValueError("stratified_subset: per_class must be positive");
  std::array<std::vector<std::uint32_t>, kClassCount> by_class;
  for (std::uint32_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);

  std::vector<std::uint32_t> keep;
  keep.reserve(static_cast<std::size_t>(per_class) * kClassCount);
  for (int c = 0; c < kClassCount; ++c) {
    auto& idx = by_class[c];
    if (static_cast<int>(idx.size()) < per_class)
      throw ValueError("stratified_subset: class " + std::to_string(c) + " has only " +
                       std::to_string(idx.size()) + " examples, need " +
                       std::to_string(per_class));
    RngStream rng = substream(seed, "subset", static_cast<std::uint64_t>(c));
    for (int k = 0; k < per_class; ++k) {
      std::uint32_t j = k + rng.next_below(static_cast<std::uint32_t>(idx.size() - k));
      std::swap(idx[k], idx[j]);
      keep.push_back(idx[k]);
    }
  }
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.role = data.role;
  out.examples.reserve(keep.size());
  for (std::uint32_t i : keep) out.examples.push_back(data[i]);
  return out;
}

}  // namespace noisebench
