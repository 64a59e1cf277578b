// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include <doctest.h>

#include "gdr/data_io.hpp"
#include "gdr/errors.hpp"

using namespace gdr;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("data_io");

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void push_u32_be(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

/// 4 images of 2x2 pixels with known bytes, plus matching labels.
void write_fixture(const fs::path& images, const fs::path& labels, std::uint32_t label_count = 4) {
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803);
  push_u32_be(img, 4);
  push_u32_be(img, 2);
  push_u32_be(img, 2);
  for (unsigned char b = 0; b < 16; ++b) img.push_back(b * 16);
  write_bytes(images, img);

  std::vector<unsigned char> lab;
  push_u32_be(lab, 0x00000801);
  push_u32_be(lab, label_count);
  for (std::uint32_t i = 0; i < label_count; ++i) lab.push_back(static_cast<unsigned char>(i % 3));
  write_bytes(labels, lab);
}

}  // namespace

TEST_CASE("fixture IDX pair loads with scaled pixels") {
  const fs::path img = temp_file("gdr_idx_images"), lab = temp_file("gdr_idx_labels");
  write_fixture(img, lab);
  const Dataset ds = load_idx(img.string(), lab.string());
  CHECK(ds.size() == 4);
  CHECK(ds.input_dim == 4);
  CHECK(ds.examples[0].pixels[0] == 0.0);
  CHECK(ds.examples[0].pixels[1] == doctest::Approx(16.0 / 255.0));
  CHECK(ds.examples[3].pixels[3] == doctest::Approx(240.0 / 255.0));
  CHECK(ds.examples[1].label == 1);
  ds.validate();
  fs::remove(img);
  fs::remove(lab);
}

TEST_CASE("IDX error paths: swapped magic, truncation, count mismatch") {
  const fs::path img = temp_file("gdr_idx_images2"), lab = temp_file("gdr_idx_labels2");
  write_fixture(img, lab);

  SUBCASE("label magic on the image path") {
    CHECK_THROWS_WITH_AS(load_idx(lab.string(), lab.string()),
                         doctest::Contains("bad magic"), IoError);
  }
  SUBCASE("image magic on the label path") {
    CHECK_THROWS_AS(load_idx(img.string(), img.string()), IoError);
  }
  SUBCASE("count mismatch") {
    write_fixture(img, lab, /*label_count=*/3);
    CHECK_THROWS_WITH_AS(load_idx(img.string(), lab.string()),
                         doctest::Contains("count mismatch"), IoError);
  }
  SUBCASE("truncated pixel payload") {
    std::vector<unsigned char> short_img;
    push_u32_be(short_img, 0x00000803);
    push_u32_be(short_img, 4);
    push_u32_be(short_img, 2);
    push_u32_be(short_img, 2);
    for (int i = 0; i < 10; ++i) short_img.push_back(7);  // 6 bytes missing
    write_bytes(img, short_img);
    CHECK_THROWS_WITH_AS(load_idx(img.string(), lab.string()),
                         doctest::Contains("truncated"), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx("/nonexistent/images", lab.string()), IoError);
  }
  fs::remove(img);
  fs::remove(lab);
}

TEST_CASE("IDX round-trip stays within u8 quantization") {
  const Dataset ds = synthetic_blobs(9, 4, 25, 0.1, 5);
  const fs::path img = temp_file("gdr_idx_rt_images"), lab = temp_file("gdr_idx_rt_labels");
  write_idx(ds, img.string(), lab.string());
  const Dataset back = load_idx(img.string(), lab.string());
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.examples[i].label == ds.examples[i].label);
    for (int j = 0; j < ds.input_dim; ++j) {
      CHECK(std::fabs(back.examples[i].pixels[j] - ds.examples[i].pixels[j]) <= 1.0 / 510.0);
    }
  }
  fs::remove(img);
  fs::remove(lab);
}

TEST_CASE("real MNIST loads in full when present") {
  // Looks for the official files under GDR_MNIST_DIR or ./data/mnist;
  // skips silently when absent (no network in the test environment).
  const char* env = std::getenv("GDR_MNIST_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path("data/mnist");
  const fs::path train_images = dir / "train-images-idx3-ubyte";
  if (!fs::exists(train_images)) {
    MESSAGE("MNIST files not present; skipping");
    return;
  }
  const Dataset train =
      load_idx(train_images.string(), (dir / "train-labels-idx1-ubyte").string());
  const Dataset test = load_idx((dir / "t10k-images-idx3-ubyte").string(),
                                (dir / "t10k-labels-idx1-ubyte").string());
  CHECK(train.size() == 60000);
  CHECK(test.size() == 10000);
  train.validate();  // all pixels in [0,1], labels in range
  test.validate();
}

TEST_CASE("subset: identity, determinism, stratification") {
  const Dataset ds = synthetic_blobs(6, 5, 40, 0.05, 9);

  const Dataset all = subset(ds, ds.size(), 1, false);
  CHECK(all.size() == ds.size());

  const Dataset a = subset(ds, 50, 7, false);
  const Dataset b = subset(ds, 50, 7, false);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.examples[i].pixels == b.examples[i].pixels);
    CHECK(a.examples[i].label == b.examples[i].label);
  }

  const Dataset strat = subset(ds, 100, 3, true);
  std::map<int, int> counts;
  for (const auto& e : strat.examples) ++counts[e.label];
  for (const auto& [label, count] : counts) CHECK(count == 20);  // balanced source

  CHECK_THROWS_AS(subset(ds, ds.size() + 1, 1, false), ValueError);
}

TEST_CASE("synthetic blobs: spread zero pins examples to centers; seeds reproduce") {
  const Dataset a = synthetic_blobs(8, 3, 10, 0.0, 4);
  const Dataset b = synthetic_blobs(8, 3, 10, 0.0, 4);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.examples[i].pixels == b.examples[i].pixels);
  }
  // spread 0: examples of one class are all the same point
  std::map<int, std::vector<double>> first;
  for (const auto& e : a.examples) {
    if (!first.count(e.label)) {
      first[e.label] = e.pixels;
    } else {
      CHECK(e.pixels == first[e.label]);
    }
  }
  a.validate();
  CHECK_THROWS_AS(synthetic_blobs(1, 3, 10, 0.1, 1), ValueError);
}

TEST_SUITE_END();
