#include "fscil/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fscil/rng.hpp"

namespace fscil {

void ExtractorConfig::validate() const {
  if (input_c == 0 || input_h == 0 || input_w == 0) {
    throw ConfigError("extractor: input dims must be positive");
  }
  if (hidden.empty()) throw ConfigError("extractor: at least one hidden layer required");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("extractor: hidden width must be positive");
  }
  if (feature_dim < 2) throw ConfigError("extractor: feature_dim must be >= 2");
  if (kind == ExtractorKind::conv_small) {
    std::size_t div = std::size_t{1} << hidden.size();
    if (input_h % div != 0 || input_w % div != 0) {
      throw ConfigError("extractor: conv-small needs input dims divisible by 2^layers");
    }
  }
}

FeatureExtractor::FeatureExtractor(ExtractorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto rng = make_rng(mix_seed(seed, 0x5eedfeedULL));
  auto normal_matrix = [&rng](std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(fan_in)));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
  };
  auto add_param = [this](std::string id, Tensor value) {
    params_.push_back(std::make_unique<Parameter>(std::move(id), std::move(value), ParamGroup::slow));
  };
  if (cfg_.kind == ExtractorKind::mlp) {
    std::size_t in = cfg_.input_c * cfg_.input_h * cfg_.input_w;
    for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
      std::size_t out = cfg_.hidden[l];
      add_param("ext.w" + std::to_string(l), normal_matrix({in, out}, in));
      add_param("ext.b" + std::to_string(l), Tensor({out}));
      in = out;
    }
    add_param("ext.w_out", normal_matrix({in, cfg_.feature_dim}, in));
    add_param("ext.b_out", Tensor({cfg_.feature_dim}));
  } else {
    std::size_t in_c = cfg_.input_c;
    std::size_t h = cfg_.input_h, w = cfg_.input_w;
    for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
      std::size_t out_c = cfg_.hidden[l];
      add_param("ext.conv" + std::to_string(l) + ".w",
                normal_matrix({out_c, in_c, 3, 3}, in_c * 9));
      add_param("ext.conv" + std::to_string(l) + ".b", Tensor({out_c}));
      in_c = out_c;
      h /= 2;
      w /= 2;
    }
    std::size_t flat = in_c * h * w;
    add_param("ext.w_out", normal_matrix({flat, cfg_.feature_dim}, flat));
    add_param("ext.b_out", Tensor({cfg_.feature_dim}));
  }
}

FeatureExtractor FeatureExtractor::clone() const {
  FeatureExtractor c;
  c.cfg_ = cfg_;
  c.params_.reserve(params_.size());
  for (const auto& p : params_) c.params_.push_back(std::make_unique<Parameter>(*p));
  return c;
}

VarId FeatureExtractor::build(Tape& tape, const Tensor& images,
                              const std::vector<VarId>& pvars) const {
  if (images.ndim() != 4 || images.dim(1) != cfg_.input_c || images.dim(2) != cfg_.input_h ||
      images.dim(3) != cfg_.input_w) {
    throw ConfigError("extract: image batch " + images.shape_str() + " does not match input [" +
                      std::to_string(cfg_.input_c) + "," + std::to_string(cfg_.input_h) + "," +
                      std::to_string(cfg_.input_w) + "]");
  }
  std::size_t b = images.dim(0);
  VarId x = tape.constant(images);
  std::size_t pi = 0;
  if (cfg_.kind == ExtractorKind::mlp) {
    x = tape.reshape(x, {b, cfg_.input_c * cfg_.input_h * cfg_.input_w});
    for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
      x = tape.relu(tape.add_bias(tape.matmul(x, pvars[pi]), pvars[pi + 1]));
      pi += 2;
    }
    x = tape.add_bias(tape.matmul(x, pvars[pi]), pvars[pi + 1]);
  } else {
    std::size_t h = cfg_.input_h, w = cfg_.input_w;
    for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
      x = tape.meanpool2(tape.relu(tape.conv2d(x, pvars[pi], pvars[pi + 1])));
      pi += 2;
      h /= 2;
      w /= 2;
    }
    x = tape.reshape(x, {b, cfg_.hidden.back() * h * w});
    x = tape.add_bias(tape.matmul(x, pvars[pi]), pvars[pi + 1]);
  }
  return x;
}

VarId FeatureExtractor::forward(Tape& tape, const Tensor& images) {
  std::vector<VarId> pvars;
  pvars.reserve(params_.size());
  for (auto& p : params_) pvars.push_back(tape.leaf(*p));
  return build(tape, images, pvars);
}

Tensor FeatureExtractor::forward_values(const Tensor& images) const {
  Tape tape;
  std::vector<VarId> pvars;
  pvars.reserve(params_.size());
  for (const auto& p : params_) pvars.push_back(tape.constant(p->value));
  return tape.val(build(tape, images, pvars));
}

std::vector<Parameter*> FeatureExtractor::params() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> FeatureExtractor::params() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void FeatureExtractor::set_group(ParamGroup g) {
  for (auto& p : params_) p->group = g;
}

VarId cosine_logits(Tape& tape, VarId features, VarId weight, double scale) {
  const Tensor& W = tape.val(weight);
  if (W.ndim() != 2) throw ConfigError("cosine_logits: weight must be [d,n], got " + W.shape_str());
  const Tensor& F = tape.val(features);
  std::size_t fd = F.ndim() == 2 ? F.dim(1) : (F.ndim() == 1 ? F.dim(0) : 0);
  if (fd != W.dim(0)) {
    throw ConfigError("cosine_logits: feature dim " + std::to_string(fd) +
                      " does not match weight " + W.shape_str());
  }
  VarId f2 = tape.val(features).ndim() == 1 ? tape.reshape(features, {1, fd}) : features;
  return tape.scale(tape.matmul(tape.l2_normalize_rows(f2), tape.l2_normalize_cols(weight)), scale);
}

Tensor cosine_logits_values(const Tensor& features, const Tensor& weight, double scale) {
  Tape tape;
  return tape.val(cosine_logits(tape, tape.constant(features), tape.constant(weight), scale));
}

Tensor softmax_values(const Tensor& logits) {
  Tape tape;
  return tape.val(tape.softmax_rows(tape.constant(logits)));
}

Tensor geometric_transform(const Tensor& image, std::size_t b, std::size_t num_transforms) {
  if (image.ndim() != 3) {
    throw ConfigError("geometric_transform: image must be [c,h,w], got " + image.shape_str());
  }
  if (num_transforms != 2 && num_transforms != 4) {
    throw ConfigError("geometric_transform: supported transform counts are 2 or 4 rotations");
  }
  if (b >= num_transforms) throw ContractViolation("geometric_transform: index out of range");
  // b indexes equally spaced rotations: quarter turns for 4, half turns for 2.
  std::size_t quarter_turns = b * (4 / num_transforms);
  Tensor cur = image;
  for (std::size_t k = 0; k < quarter_turns; ++k) {
    std::size_t c = cur.dim(0), h = cur.dim(1), w = cur.dim(2);
    Tensor next({c, w, h});
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          // 90-degree counterclockwise rotation.
          next[(ch * w + (w - 1 - x)) * h + y] = cur[(ch * h + y) * w + x];
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

void BaseTrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("base_train: batch_size must be positive");
  if (lr0 < 0.0) throw ConfigError("base_train: negative learning rate");
  if (geo_transforms < 2) throw ConfigError("base_train: need at least 2 geometric transforms");
  if (!(decay > 0.0)) throw ConfigError("base_train: decay must be positive");
}

double base_lr_at(const BaseTrainConfig& cfg, std::size_t epoch) {
  std::size_t m1 = static_cast<std::size_t>(0.75 * static_cast<double>(cfg.epochs));
  std::size_t m2 = static_cast<std::size_t>(0.875 * static_cast<double>(cfg.epochs));
  double lr = cfg.lr0;
  if (epoch >= m1) lr *= cfg.decay;
  if (epoch >= m2) lr *= cfg.decay;
  return lr;
}

Tensor stack_images(const std::vector<const Tensor*>& images) {
  if (images.empty()) throw DataError("stack_images: empty batch");
  const Tensor& first = *images[0];
  if (first.ndim() != 3) throw ConfigError("stack_images: images must be [c,h,w]");
  Tensor out({images.size(), first.dim(0), first.dim(1), first.dim(2)});
  std::size_t per = first.size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(first)) throw ConfigError("stack_images: mixed image shapes");
    for (std::size_t j = 0; j < per; ++j) out[i * per + j] = (*images[i])[j];
  }
  return out;
}

VarId cross_entropy_mean(Tape& tape, VarId logits, const std::vector<int>& labels) {
  const Tensor& L = tape.val(logits);
  if (L.ndim() != 2) throw ConfigError("cross_entropy: logits must be [b,n], got " + L.shape_str());
  std::size_t b = L.dim(0), n = L.dim(1);
  if (labels.size() != b) throw DataError("cross_entropy: label count mismatch");
  Tensor onehot({b, n});
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n) {
      throw DataError("cross_entropy: label out of range");
    }
    onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  VarId picked = tape.mul(tape.log(tape.softmax_rows(logits)), tape.constant(std::move(onehot)));
  return tape.scale(tape.sum(picked), -1.0 / static_cast<double>(b));
}

void base_train(FeatureExtractor& extractor, Parameter& class_head, Parameter& geo_head,
                const std::vector<Tensor>& images, const std::vector<int>& labels,
                std::size_t n_base, const BaseTrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (images.size() != labels.size() || images.empty()) {
    throw DataError("base_train: empty or inconsistent base set");
  }
  std::vector<std::size_t> per_class(n_base, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_base) {
      throw DataError("base_train: label " + std::to_string(l) + " outside base range");
    }
    ++per_class[static_cast<std::size_t>(l)];
  }
  for (std::size_t c = 0; c < n_base; ++c) {
    if (per_class[c] == 0) throw DataError("base_train: class " + std::to_string(c) + " has no examples");
  }
  if (class_head.value.ndim() != 2 || class_head.value.dim(1) != n_base ||
      class_head.value.dim(0) != extractor.config().feature_dim) {
    throw ConfigError("base_train: class head must be [feature_dim, n_base]");
  }
  if (geo_head.value.ndim() != 2 || geo_head.value.dim(1) != cfg.geo_transforms ||
      geo_head.value.dim(0) != extractor.config().feature_dim) {
    throw ConfigError("base_train: geometric head must be [feature_dim, geo_transforms]");
  }
  if (cfg.geo_transforms == 4 && extractor.config().input_h != extractor.config().input_w) {
    throw ConfigError("base_train: quarter-turn transforms need square images");
  }

  std::vector<Parameter*> params = extractor.params();
  params.push_back(&class_head);
  params.push_back(&geo_head);

  auto rng = make_rng(mix_seed(seed, 0xba5e0ULL));
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  SgdOptimizer opt;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = base_lr_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Tensor*> batch;
      std::vector<int> batch_labels;
      std::vector<Tensor> rotated;
      std::vector<int> geo_labels;
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
        for (std::size_t bidx = 0; bidx < cfg.geo_transforms; ++bidx) {
          rotated.push_back(geometric_transform(images[order[i]], bidx, cfg.geo_transforms));
          geo_labels.push_back(static_cast<int>(bidx));
        }
      }
      std::vector<const Tensor*> geo_batch;
      geo_batch.reserve(rotated.size());
      for (const Tensor& t : rotated) geo_batch.push_back(&t);

      Tape tape;
      VarId feats = extractor.forward(tape, stack_images(batch));
      VarId main_ce =
          cross_entropy_mean(tape, cosine_logits(tape, feats, tape.leaf(class_head), cfg.cosine_scale),
                  batch_labels);
      VarId geo_feats = extractor.forward(tape, stack_images(geo_batch));
      VarId geo_ce =
          cross_entropy_mean(tape, cosine_logits(tape, geo_feats, tape.leaf(geo_head), cfg.cosine_scale),
                  geo_labels);
      VarId total = tape.add(main_ce, geo_ce);
      if (!std::isfinite(tape.val(total)[0])) {
        throw TrainingDivergence("base_train: non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(total);
      opt.step(params, lr, lr, cfg.momentum);
    }
  }
}

}  // namespace fscil
