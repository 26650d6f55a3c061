#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

// Recipe for a procedurally generated benchmark. Each class is a smooth
// random texture (a grid x grid field upsampled bilinearly); samples add
// pixel noise. Pixels are quantized to float32 so that serialization is
// lossless.
struct SyntheticSpec {
  std::size_t n_base = 20;            // base-session classes
  std::size_t n_way = 5;              // classes per incremental session
  std::size_t k_shot = 5;             // examples per incremental class
  std::size_t sessions = 4;           // incremental session count T
  std::size_t img_h = 8, img_w = 8, img_c = 1;
  std::size_t grid = 4;               // control-point grid of the class texture
  double noise_sigma = 0.15;
  std::size_t queries_per_class = 50;
  std::size_t base_shots = 30;        // base-session examples per class
  std::uint64_t seed = 1234;

  std::size_t total_classes() const { return n_base + sessions * n_way; }
  void validate() const;
};

struct LabeledImage {
  Tensor image;  // [c,h,w]
  int label = 0;
};

struct Benchmark {
  std::size_t img_h = 0, img_w = 0, img_c = 0;
  std::size_t n_base = 0, n_way = 0, k_shot = 0, sessions = 0;
  std::vector<LabeledImage> base_train;
  std::vector<std::vector<LabeledImage>> session_sets;  // [sessions][n_way * k_shot]
  std::vector<std::vector<LabeledImage>> query_sets;    // [total_classes][queries]

  std::size_t total_classes() const { return n_base + sessions * n_way; }
  // Checks label ranges, exact N-way K-shot sessions and disjoint class
  // ranges across sessions.
  void validate() const;
};

// Deterministic in (spec, seed); the spec's own seed field is the default.
Benchmark generate(const SyntheticSpec& spec);
Benchmark generate(const SyntheticSpec& spec, std::uint64_t seed);

// Binary dataset format, little-endian:
//   magic "FSD1" | u32 classes | u32 images | u16 h | u16 w | u16 c
//   | u32 k_shot | u32 n_way | u32 sessions | u32 n_base | u32 base_images
//   | images: u16 label, f32 * (h*w*c)
// Image order: base set, session sets in session order, then query sets by
// ascending class.
std::vector<std::uint8_t> serialize(const Benchmark& bench);
Benchmark deserialize(const std::vector<std::uint8_t>& bytes);
void save_benchmark(const Benchmark& bench, const std::string& path);
Benchmark load_benchmark(const std::string& path);

// FNV-1a content hash of the serialized benchmark, as 16 hex digits.
std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes);
std::string benchmark_hash(const Benchmark& bench);

}  // namespace fscil
