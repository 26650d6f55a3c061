#include "fscil/amplify.hpp"

#include <cmath>

#include "fscil/rng.hpp"

namespace fscil {

void AmplifyConfig::validate() const {
  if (factor == 0) throw ConfigError("amplify: factor must be >= 1");
  if (!(beta_a > 0.0)) throw ConfigError("amplify: beta_a must be positive");
}

CutBox make_box(std::size_t h, std::size_t w, std::size_t bh, std::size_t bw, std::size_t cy,
                std::size_t cx) {
  if (cy >= h || cx >= w) throw ContractViolation("make_box: center outside the image");
  auto clip = [](long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); };
  long top = static_cast<long>(cy) - static_cast<long>(bh / 2);
  long left = static_cast<long>(cx) - static_cast<long>(bw / 2);
  CutBox box;
  box.y0 = static_cast<std::size_t>(clip(top, 0, static_cast<long>(h)));
  box.y1 = static_cast<std::size_t>(clip(top + static_cast<long>(bh), 0, static_cast<long>(h)));
  box.x0 = static_cast<std::size_t>(clip(left, 0, static_cast<long>(w)));
  box.x1 = static_cast<std::size_t>(clip(left + static_cast<long>(bw), 0, static_cast<long>(w)));
  return box;
}

double sample_beta(std::mt19937_64& rng, double a) {
  if (!(a > 0.0)) throw ConfigError("sample_beta: parameter must be positive");
  std::gamma_distribution<double> gamma(a, 1.0);
  double g1 = gamma(rng);
  double g2 = gamma(rng);
  if (g1 + g2 == 0.0) return 0.5;
  return g1 / (g1 + g2);
}

namespace {

void require_image(const Tensor& t, const char* op) {
  if (t.ndim() != 3 || t.size() == 0) {
    throw ConfigError(std::string(op) + ": image must be nonempty [c,h,w], got " + t.shape_str());
  }
}

}  // namespace

std::pair<Tensor, double> cutmix_core(const Tensor& a, const Tensor& b, double lambda,
                                      std::size_t cy, std::size_t cx) {
  require_image(a, "cutmix");
  if (!a.same_shape(b)) throw ConfigError("cutmix: image shapes differ");
  if (lambda < 0.0 || lambda > 1.0) throw ContractViolation("cutmix: lambda outside [0,1]");
  std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  double r = std::sqrt(1.0 - lambda);
  std::size_t bh = static_cast<std::size_t>(r * static_cast<double>(h));
  std::size_t bw = static_cast<std::size_t>(r * static_cast<double>(w));
  CutBox box = make_box(h, w, bh, bw, cy, cx);
  Tensor out = a;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = box.y0; y < box.y1; ++y) {
      for (std::size_t x = box.x0; x < box.x1; ++x) {
        out[(ch * h + y) * w + x] = b[(ch * h + y) * w + x];
      }
    }
  }
  double adj = 1.0 - static_cast<double>(box.area()) / static_cast<double>(h * w);
  return {std::move(out), adj};
}

std::pair<Tensor, double> cutmix(const Tensor& a, const Tensor& b, std::mt19937_64& rng,
                                 double beta_a) {
  require_image(a, "cutmix");
  double lambda = sample_beta(rng, beta_a);
  std::uniform_int_distribution<std::size_t> ydist(0, a.dim(1) - 1);
  std::uniform_int_distribution<std::size_t> xdist(0, a.dim(2) - 1);
  std::size_t cy = ydist(rng);
  std::size_t cx = xdist(rng);
  return cutmix_core(a, b, lambda, cy, cx);
}

std::pair<Tensor, double> mixup_core(const Tensor& a, const Tensor& b, double lambda) {
  require_image(a, "mixup");
  if (!a.same_shape(b)) throw ConfigError("mixup: image shapes differ");
  if (lambda < 0.0 || lambda > 1.0) throw ContractViolation("mixup: lambda outside [0,1]");
  Tensor out(std::vector<std::size_t>(a.shape()));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return {std::move(out), lambda};
}

std::pair<Tensor, double> mixup(const Tensor& a, const Tensor& b, std::mt19937_64& rng,
                                double beta_a) {
  return mixup_core(a, b, sample_beta(rng, beta_a));
}

Tensor cutout_core(const Tensor& image, std::size_t cy, std::size_t cx) {
  require_image(image, "cutout");
  std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  CutBox box = make_box(h, w, h / 2, w / 2, cy, cx);
  Tensor out = image;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = box.y0; y < box.y1; ++y) {
      for (std::size_t x = box.x0; x < box.x1; ++x) out[(ch * h + y) * w + x] = 0.0;
    }
  }
  return out;
}

Tensor cutout(const Tensor& image, std::mt19937_64& rng) {
  require_image(image, "cutout");
  std::uniform_int_distribution<std::size_t> ydist(0, image.dim(1) - 1);
  std::uniform_int_distribution<std::size_t> xdist(0, image.dim(2) - 1);
  std::size_t cy = ydist(rng);
  std::size_t cx = xdist(rng);
  return cutout_core(image, cy, cx);
}

std::vector<Tensor> amplify(const std::vector<Tensor>& images, const AmplifyConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw DataError("amplify: empty input set");
  for (const Tensor& t : images) {
    require_image(t, "amplify");
    if (!t.same_shape(images.front())) throw ConfigError("amplify: mixed image shapes");
  }
  bool mixing = cfg.scheme == AmplifyScheme::cutmix || cfg.scheme == AmplifyScheme::mixup;
  if (mixing && images.size() < 2) {
    throw ConfigError("amplify: mixing schemes need at least two images");
  }

  std::vector<Tensor> out;
  out.reserve(cfg.factor * images.size());
  if (cfg.scheme == AmplifyScheme::none) {
    for (std::size_t f = 0; f < cfg.factor; ++f) {
      for (const Tensor& t : images) out.push_back(t);
    }
    return out;
  }

  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::size_t n_out = cfg.factor * images.size();
  for (std::size_t i = 0; i < n_out; ++i) {
    auto rng = make_rng(mix_seed(cfg.seed, 0xa3921ULL, i));
    std::size_t ia = pick(rng);
    switch (cfg.scheme) {
      case AmplifyScheme::cutmix:
        out.push_back(cutmix(images[ia], images[pick(rng)], rng, cfg.beta_a).first);
        break;
      case AmplifyScheme::mixup:
        out.push_back(mixup(images[ia], images[pick(rng)], rng, cfg.beta_a).first);
        break;
      case AmplifyScheme::cutout:
        out.push_back(cutout(images[ia], rng));
        break;
      case AmplifyScheme::none:
        break;
    }
  }
  return out;
}

}  // namespace fscil
