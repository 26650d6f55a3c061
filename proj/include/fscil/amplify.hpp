#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

enum class AmplifyScheme { cutmix, mixup, cutout, none };

struct AmplifyConfig {
  AmplifyScheme scheme = AmplifyScheme::cutmix;
  std::size_t factor = 16;  // |amplified| = factor * |input|
  double beta_a = 1.0;      // Beta(a, a) parameter for the mixing ratio
  std::uint64_t seed = 0;

  void validate() const;
};

// Rectangle [y0,y1) x [x0,x1), already clipped to the image.
struct CutBox {
  std::size_t y0, y1, x0, x1;
  std::size_t area() const { return (y1 - y0) * (x1 - x0); }
};

// Box of size bh x bw centered at (cy, cx), clipped to h x w.
CutBox make_box(std::size_t h, std::size_t w, std::size_t bh, std::size_t bw, std::size_t cy,
                std::size_t cx);

double sample_beta(std::mt19937_64& rng, double a);

// Pastes a box from b into a. The box edge ratio is sqrt(1 - lambda); the
// returned ratio is recomputed from the surviving pasted area:
// 1 - pasted / (h * w).
std::pair<Tensor, double> cutmix_core(const Tensor& a, const Tensor& b, double lambda,
                                      std::size_t cy, std::size_t cx);
std::pair<Tensor, double> cutmix(const Tensor& a, const Tensor& b, std::mt19937_64& rng,
                                 double beta_a);

// Elementwise convex blend lambda * a + (1 - lambda) * b.
std::pair<Tensor, double> mixup_core(const Tensor& a, const Tensor& b, double lambda);
std::pair<Tensor, double> mixup(const Tensor& a, const Tensor& b, std::mt19937_64& rng,
                                double beta_a);

// Zeroes one quarter-area box centered at (cy, cx).
Tensor cutout_core(const Tensor& image, std::size_t cy, std::size_t cx);
Tensor cutout(const Tensor& image, std::mt19937_64& rng);

// Builds the amplified batch: factor * |images| outputs, each produced from
// uniformly sampled source images (with replacement, across classes). Labels
// are deliberately not produced; the amplified batch only feeds distillation.
// Each output index uses its own seeded stream, so results are independent of
// evaluation order.
std::vector<Tensor> amplify(const std::vector<Tensor>& images, const AmplifyConfig& cfg);

}  // namespace fscil
