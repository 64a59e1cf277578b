// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "gdr/errors.hpp"

namespace gdr {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError(path + ": truncated header");
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_u32_be(std::ostream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void Dataset::validate() const {
  for (const LabeledExample& e : examples) {
    if (static_cast<int>(e.pixels.size()) != input_dim) {
      throw ShapeError("dataset example dimension mismatch");
    }
    if (e.label < 0 || e.label >= class_count) throw ValueError("dataset label out of range");
    for (double p : e.pixels) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValueError("pixel outside [0,1]");
    }
  }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open " + labels_path);

  const std::uint32_t img_magic = read_u32_be(imgs, images_path);
  if (img_magic != kImageMagic) {
    throw IoError(images_path + ": bad magic 0x" + std::to_string(img_magic) +
                  " (expected IDX image file)");
  }
  const std::uint32_t img_count = read_u32_be(imgs, images_path);
  const std::uint32_t rows = read_u32_be(imgs, images_path);
  const std::uint32_t cols = read_u32_be(imgs, images_path);

  const std::uint32_t lab_magic = read_u32_be(labs, labels_path);
  if (lab_magic != kLabelMagic) {
    throw IoError(labels_path + ": bad magic 0x" + std::to_string(lab_magic) +
                  " (expected IDX label file)");
  }
  const std::uint32_t lab_count = read_u32_be(labs, labels_path);
  if (img_count != lab_count) {
    throw IoError("image/label count mismatch: " + std::to_string(img_count) + " vs " +
                  std::to_string(lab_count));
  }

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  if (dim == 0) throw IoError(images_path + ": zero-sized images");

  Dataset ds;
  ds.input_dim = static_cast<int>(dim);
  ds.source = images_path;
  ds.examples.resize(img_count);
  std::vector<unsigned char> buf(dim);
  int max_label = 0;
  for (std::uint32_t i = 0; i < img_count; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
    if (!imgs) throw IoError(images_path + ": truncated pixel payload at image " + std::to_string(i));
    char lab = 0;
    labs.read(&lab, 1);
    if (!labs) throw IoError(labels_path + ": truncated label payload at index " + std::to_string(i));
    LabeledExample& e = ds.examples[i];
    e.pixels.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) e.pixels[j] = buf[j] / 255.0;
    e.label = static_cast<unsigned char>(lab);
    max_label = std::max(max_label, e.label);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.class_count > 256) throw ValueError("IDX labels are u8; class count too large");
  std::ofstream imgs(images_path, std::ios::binary | std::ios::trunc);
  if (!imgs) throw IoError("cannot open " + images_path + " for writing");
  std::ofstream labs(labels_path, std::ios::binary | std::ios::trunc);
  if (!labs) throw IoError("cannot open " + labels_path + " for writing");

  // Store as a single row of input_dim columns; loaders only use rows*cols.
  write_u32_be(imgs, kImageMagic);
  write_u32_be(imgs, static_cast<std::uint32_t>(ds.size()));
  write_u32_be(imgs, 1);
  write_u32_be(imgs, static_cast<std::uint32_t>(ds.input_dim));
  write_u32_be(labs, kLabelMagic);
  write_u32_be(labs, static_cast<std::uint32_t>(ds.size()));

  std::vector<unsigned char> buf(ds.input_dim);
  for (const LabeledExample& e : ds.examples) {
    for (int j = 0; j < ds.input_dim; ++j) {
      buf[j] = static_cast<unsigned char>(std::lround(e.pixels[j] * 255.0));
    }
    imgs.write(reinterpret_cast<const char*>(buf.data()), ds.input_dim);
    const char lab = static_cast<char>(e.label);
    labs.write(&lab, 1);
  }
  if (!imgs || !labs) throw IoError("short write while exporting IDX files");
}

Dataset subset(const Dataset& ds, std::size_t count, std::uint64_t seed, bool stratified) {
  if (count > ds.size()) {
    throw ValueError("subset: requested " + std::to_string(count) + " of " +
                     std::to_string(ds.size()) + " examples");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(count);

  if (!stratified) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::vector<std::vector<std::size_t>> by_class(ds.class_count);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.examples[i].label].push_back(i);
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);
    // Proportional quota per class, remainders to the largest fractions.
    std::vector<std::size_t> quota(by_class.size());
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      const double exact = static_cast<double>(count) * by_class[c].size() / ds.size();
      quota[c] = static_cast<std::size_t>(exact);
      quota[c] = std::min(quota[c], by_class[c].size());
      assigned += quota[c];
      frac.emplace_back(exact - static_cast<double>(quota[c]), c);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [f, c] : frac) {
      if (assigned >= count) break;
      if (quota[c] < by_class[c].size()) {
        ++quota[c];
        ++assigned;
      }
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      chosen.insert(chosen.end(), by_class[c].begin(),
                    by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
  }

  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  out.input_dim = ds.input_dim;
  out.class_count = ds.class_count;
  out.source = ds.source + "#subset" + std::to_string(count);
  out.examples.reserve(chosen.size());
  for (std::size_t i : chosen) out.examples.push_back(ds.examples[i]);
  return out;
}

Dataset synthetic_blobs(int n, int classes, int per_class, double spread, std::uint64_t seed) {
  if (n < 2 || classes < 2 || per_class < 1) {
    throw ValueError("synthetic_blobs: need n >= 2, classes >= 2, per_class >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center_dist(0.2, 0.8);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::vector<double>> centers(classes, std::vector<double>(n));
  for (auto& c : centers) {
    for (double& v : c) v = center_dist(rng);
  }

  Dataset ds;
  ds.input_dim = n;
  ds.class_count = classes;
  ds.source = "synthetic_blobs(n=" + std::to_string(n) + ",C=" + std::to_string(classes) +
              ",spread=" + std::to_string(spread) + ",seed=" + std::to_string(seed) + ")";
  ds.examples.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int k = 0; k < per_class; ++k) {
    for (int c = 0; c < classes; ++c) {
      LabeledExample e;
      e.label = c;
      e.pixels.resize(n);
      for (int j = 0; j < n; ++j) {
        const double v = centers[c][j] + spread * noise(rng);
        e.pixels[j] = std::clamp(v, 0.0, 1.0);
      }
      ds.examples.push_back(std::move(e));
    }
  }
  std::shuffle(ds.examples.begin(), ds.examples.end(), rng);
  return ds;
}

}  // namespace gdr
