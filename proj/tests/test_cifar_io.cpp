#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "noisebench/cifar_io.hpp"

using namespace noisebench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() /
           ("noisebench-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// distinct marker in the first value of every image so set membership and
// ordering survive copies
float marker(std::uint32_t i) { return (static_cast<float>(i) + 0.5f) / 65536.0f; }

}  // namespace

TEST_CASE("parse_batch maps record bytes to label and channel-major values") {
  std::vector<std::uint8_t> bytes(2 * kRecordBytes, 0);
  bytes[0] = 7;                                   // record 0 label
  bytes[1 + 0 * 1024 + 5 * 32 + 9] = 255;         // red, row 5, col 9
  bytes[1 + 1 * 1024 + 0 * 32 + 0] = 51;          // green, row 0, col 0
  bytes[1 + 2 * 1024 + 31 * 32 + 31] = 102;       // blue, row 31, col 31
  bytes[kRecordBytes] = 0;                        // record 1 label
  bytes[kRecordBytes + 1] = 17;

  auto examples = parse_batch(bytes);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].label == 7);
  CHECK(examples[1].label == 0);
  CHECK(examples[0].image.at(0, 5, 9) == doctest::Approx(1.0f));
  CHECK(examples[0].image.at(1, 0, 0) == doctest::Approx(51.0f / 255.0f));
  CHECK(examples[0].image.at(2, 31, 31) == doctest::Approx(102.0f / 255.0f));
  CHECK(examples[0].image.at(0, 5, 8) == 0.0f);
  CHECK(examples[1].image.at(0, 0, 0) == doctest::Approx(17.0f / 255.0f));
}

TEST_CASE("parse_batch rejects malformed input") {
  std::vector<std::uint8_t> bytes(kRecordBytes + 1, 0);
  CHECK_THROWS_AS(parse_batch(bytes), ParseError);

  std::vector<std::uint8_t> bad_label(kRecordBytes, 0);
  bad_label[0] = 10;
  CHECK_THROWS_AS(parse_batch(bad_label), ParseError);
}

TEST_CASE("serialize_batch inverts parse_batch byte for byte") {
  std::mt19937 gen(12345);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> label(0, 9);
  std::vector<std::uint8_t> bytes(100 * kRecordBytes);
  for (std::size_t r = 0; r < 100; ++r) {
    bytes[r * kRecordBytes] = static_cast<std::uint8_t>(label(gen));
    for (std::size_t i = 1; i < kRecordBytes; ++i)
      bytes[r * kRecordBytes + i] = static_cast<std::uint8_t>(byte(gen));
  }
  auto examples = parse_batch(bytes);
  auto round = serialize_batch(examples);
  CHECK(round == bytes);
}

TEST_CASE("serialize_batch quantizes by nearest with clamping") {
  std::vector<LabeledExample> ex(1);
  ex[0].label = 3;
  ex[0].image.values[0] = 0.5f;       // 127.5 rounds half away from zero
  ex[0].image.values[1] = 0.4999f;    // 127.47...
  ex[0].image.values[2] = -0.25f;     // clamps to 0
  ex[0].image.values[3] = 1.25f;      // clamps to 255
  ex[0].image.values[4] = 1.0f;
  auto bytes = serialize_batch(ex);
  CHECK(bytes[0] == 3);
  CHECK(bytes[1] == 128);
  CHECK(bytes[2] == 127);
  CHECK(bytes[3] == 0);
  CHECK(bytes[4] == 255);
  CHECK(bytes[5] == 255);
}

TEST_CASE("read_file and write_file round trip; read of a missing path throws") {
  TempDir tmp;
  std::vector<std::uint8_t> payload = {0, 1, 2, 254, 255, 42};
  write_file(tmp.path / "blob.bin", payload);
  CHECK(read_file(tmp.path / "blob.bin") == payload);
  CHECK_THROWS_AS(read_file(tmp.path / "absent.bin"), IoError);
}

TEST_CASE("loaders reject wrong example counts") {
  TempDir tmp;
  std::vector<LabeledExample> two(2);
  for (int b = 0; b < kTrainBatchFiles; ++b)
    write_file(train_batch_path(tmp.path, b), serialize_batch(two));
  CHECK_THROWS_AS(load_cifar_train(tmp.path), ParseError);

  write_file(tmp.path / "test_batch.bin", serialize_batch(two));
  CHECK_THROWS_AS(load_cifar_test(tmp.path), ParseError);

  CHECK_THROWS_AS(load_cifar_train(tmp.path / "missing"), IoError);
}

TEST_CASE("split_train_val partitions 50000 examples with a stratified validation set") {
  Dataset full;
  full.examples.resize(50000);
  for (std::uint32_t i = 0; i < 50000; ++i) {
    full[i].label = static_cast<std::uint8_t>(i % kClassCount);
    full[i].image.values[0] = marker(i);
  }

  std::vector<float> val_markers, train_head;
  {
    SplitResult split = split_train_val(full, 7);
    REQUIRE(split.train.size() == 45000);
    REQUIRE(split.validation.size() == 5000);
    CHECK(split.train.role == DatasetRole::train);
    CHECK(split.validation.role == DatasetRole::validation);

    std::array<int, kClassCount> val_hist{}, train_hist{};
    for (const auto& ex : split.validation.examples) ++val_hist[ex.label];
    for (const auto& ex : split.train.examples) ++train_hist[ex.label];
    for (int c = 0; c < kClassCount; ++c) {
      CHECK(val_hist[c] == 500);
      CHECK(train_hist[c] == 4500);
    }

    // the two halves partition the input: every marker appears exactly once
    std::vector<float> all;
    all.reserve(50000);
    for (const auto& ex : split.train.examples) all.push_back(ex.image.values[0]);
    for (const auto& ex : split.validation.examples) all.push_back(ex.image.values[0]);
    std::sort(all.begin(), all.end());
    for (std::uint32_t i = 0; i < 50000; ++i) REQUIRE(all[i] == marker(i));

    for (const auto& ex : split.validation.examples) val_markers.push_back(ex.image.values[0]);
    for (int i = 0; i < 100; ++i) train_head.push_back(split.train[i].image.values[0]);
  }

  // pure function of the seed
  SplitResult again = split_train_val(full, 7);
  for (std::size_t i = 0; i < val_markers.size(); ++i)
    REQUIRE(again.validation[i].image.values[0] == val_markers[i]);
  for (int i = 0; i < 100; ++i) REQUIRE(again.train[i].image.values[0] == train_head[i]);

  // a different seed selects a different validation set
  SplitResult other = split_train_val(full, 8);
  bool differs = false;
  for (std::size_t i = 0; i < 5000 && !differs; ++i)
    differs = other.validation[i].image.values[0] != val_markers[i];
  CHECK(differs);
}

TEST_CASE("compute_channel_stats matches a direct two-pass computation") {
  Dataset data;
  data.examples.resize(3);
  std::mt19937 gen(99);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& ex : data.examples)
    for (int i = 0; i < kImageValues; ++i) ex.image.values[i] = u(gen);

  ChannelStats stats = compute_channel_stats(data);
  for (int c = 0; c < kChannels; ++c) {
    double sum = 0.0;
    for (const auto& ex : data.examples)
      for (int p = 0; p < kPlanePixels; ++p)
        sum += static_cast<double>(ex.image.values[c * kPlanePixels + p]);
    const double mean = sum / (3.0 * kPlanePixels);
    double ss = 0.0;
    for (const auto& ex : data.examples)
      for (int p = 0; p < kPlanePixels; ++p) {
        const double d = static_cast<double>(ex.image.values[c * kPlanePixels + p]) - mean;
        ss += d * d;
      }
    const double stddev = std::sqrt(ss / (3.0 * kPlanePixels));
    CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(stats.std[c] == doctest::Approx(stddev).epsilon(1e-9));
  }

  Dataset flat;
  flat.examples.resize(2);  // all-zero images have zero variance
  CHECK_THROWS_AS(compute_channel_stats(flat), ValueError);
  CHECK_THROWS_AS(compute_channel_stats(Dataset{}), ValueError);
}

TEST_CASE("normalize and denormalize are inverse; degenerate std rejected") {
  ChannelStats stats;
  stats.mean = {0.4, 0.5, 0.6};
  stats.std = {0.2, 0.25, 0.3};

  Image img;
  std::mt19937 gen(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < kImageValues; ++i) img.values[i] = u(gen);

  auto normed = normalize(img, stats);
  CHECK(normed[0] ==
        doctest::Approx((img.values[0] - 0.4f) / 0.2f).epsilon(1e-6));
  CHECK(normed[kPlanePixels] ==
        doctest::Approx((img.values[kPlanePixels] - 0.5f) / 0.25f).epsilon(1e-6));

  Image back = denormalize(normed, stats);
  for (int i = 0; i < kImageValues; ++i)
    REQUIRE(back.values[i] == doctest::Approx(img.values[i]).epsilon(1e-5));

  ChannelStats bad = stats;
  bad.std[1] = 0.0;
  CHECK_THROWS_AS(normalize(img, bad), ValueError);

  Eigen::ArrayXf short_block(10);
  CHECK_THROWS_AS(denormalize(short_block, stats), ShapeError);
}

TEST_CASE("crop_and_flip geometry") {
  Image img;
  for (int c = 0; c < kChannels; ++c)
    for (int i = 0; i < kImageSize; ++i)
      for (int j = 0; j < kImageSize; ++j)
        img.at(c, i, j) = static_cast<float>(c * 10000 + i * 100 + j);

  SUBCASE("centered crop without flip is the identity") {
    Image out = crop_and_flip(img, 4, 4, false);
    for (int c = 0; c < kChannels; ++c)
      for (int i = 0; i < kImageSize; ++i)
        for (int j = 0; j < kImageSize; ++j) REQUIRE(out.at(c, i, j) == img.at(c, i, j));
  }

  SUBCASE("centered crop with flip mirrors columns") {
    Image out = crop_and_flip(img, 4, 4, true);
    for (int c = 0; c < kChannels; ++c)
      for (int i = 0; i < kImageSize; ++i)
        for (int j = 0; j < kImageSize; ++j)
          REQUIRE(out.at(c, i, j) == img.at(c, i, kImageSize - 1 - j));
  }

  SUBCASE("offset 0 shifts content down-right with zero fill") {
    Image out = crop_and_flip(img, 0, 0, false);
    for (int i = 0; i < kImageSize; ++i)
      for (int j = 0; j < kImageSize; ++j) {
        if (i < 4 || j < 4)
          REQUIRE(out.at(1, i, j) == 0.0f);
        else
          REQUIRE(out.at(1, i, j) == img.at(1, i - 4, j - 4));
      }
  }

  SUBCASE("offset 8 shifts content up-left with zero fill") {
    Image out = crop_and_flip(img, 8, 8, false);
    for (int i = 0; i < kImageSize; ++i)
      for (int j = 0; j < kImageSize; ++j) {
        if (i >= kImageSize - 4 || j >= kImageSize - 4)
          REQUIRE(out.at(2, i, j) == 0.0f);
        else
          REQUIRE(out.at(2, i, j) == img.at(2, i + 4, j + 4));
      }
  }

  CHECK_THROWS_AS(crop_and_flip(img, 9, 0, false), ValueError);
  CHECK_THROWS_AS(crop_and_flip(img, 0, -1, false), ValueError);
}

TEST_CASE("augment draws offset then flip from the stream") {
  Image img;
  for (int i = 0; i < kImageValues; ++i) img.values[i] = static_cast<float>(i) / kImageValues;

  for (std::uint64_t k = 0; k < 32; ++k) {
    RngStream used(k), shadow(k);
    Image got = augment(img, used);
    const int dy = static_cast<int>(shadow.next_below(9));
    const int dx = static_cast<int>(shadow.next_below(9));
    const bool flip = shadow.next_bool();
    Image want = crop_and_flip(img, dy, dx, flip);
    REQUIRE((got.values == want.values).all());
  }
}

TEST_CASE("augment flips about half the time") {
  Image img;
  img.at(0, 16, 0) = 1.0f;  // column-asymmetric probe

  RngStream rng(31337);
  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    RngStream shadow = rng;  // same state; count the flip decision directly
    shadow.next_below(9);
    shadow.next_below(9);
    if (shadow.next_bool()) ++flips;
    augment(img, rng);
  }
  const double rate = static_cast<double>(flips) / n;
  CHECK(rate > 0.48);
  CHECK(rate < 0.52);
}

TEST_CASE("stratified_subset keeps counts, order, and determinism") {
  Dataset data;
  data.role = DatasetRole::train;
  data.examples.resize(200);
  for (std::uint32_t i = 0; i < 200; ++i) {
    data[i].label = static_cast<std::uint8_t>(i % kClassCount);
    data[i].image.values[0] = marker(i);
  }

  Dataset sub = stratified_subset(data, 5, 3);
  REQUIRE(sub.size() == 50);
  CHECK(sub.role == DatasetRole::train);

  std::array<int, kClassCount> hist{};
  for (const auto& ex : sub.examples) ++hist[ex.label];
  for (int c = 0; c < kClassCount; ++c) CHECK(hist[c] == 5);

  // original dataset order: markers strictly increasing
  for (std::size_t i = 1; i < sub.size(); ++i)
    REQUIRE(sub[i].image.values[0] > sub[i - 1].image.values[0]);

  Dataset sub2 = stratified_subset(data, 5, 3);
  for (std::size_t i = 0; i < sub.size(); ++i)
    REQUIRE(sub2[i].image.values[0] == sub[i].image.values[0]);

  Dataset other = stratified_subset(data, 5, 4);
  bool differs = false;
  for (std::size_t i = 0; i < sub.size() && !differs; ++i)
    differs = other[i].image.values[0] != sub[i].image.values[0];
  CHECK(differs);

  CHECK_THROWS_AS(stratified_subset(data, 21, 3), ValueError);
  CHECK_THROWS_AS(stratified_subset(data, 0, 3), ValueError);
}
