// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gdr {

struct LabeledExample {
  std::vector<double> pixels;  // each in [0,1]
  int label = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  int input_dim = 0;
  int class_count = 0;
  std::string source;

  std::size_t size() const { return examples.size(); }
  void validate() const;
};

/// Load an IDX image/label file pair (the MNIST container format):
/// big-endian u32 header fields, image magic 0x00000803, label magic
/// 0x00000801, u8 pixel payload scaled by 1/255 into [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Write a dataset as an IDX pair (pixels quantized to u8). Round-trips
/// within 1/510 per pixel.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

/// Deterministic sample of `count` examples without replacement. Stratified
/// sampling preserves class proportions within one example per class.
Dataset subset(const Dataset& ds, std::size_t count, std::uint64_t seed, bool stratified);

/// Gaussian clusters around C seeded centers inside the unit hypercube,
/// clipped to [0,1]. Linearly separable for small spread; the fast test
/// stand-in for image data.
Dataset synthetic_blobs(int n, int classes, int per_class, double spread, std::uint64_t seed);

}  // namespace gdr
