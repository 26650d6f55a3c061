#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fscil/autodiff.hpp"
#include "fscil/optim.hpp"
#include "fscil/tensor.hpp"

namespace fscil {

enum class ExtractorKind { mlp, conv_small };

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::mlp;
  std::size_t input_c = 1;
  std::size_t input_h = 8;
  std::size_t input_w = 8;
  std::vector<std::size_t> hidden = {48};  // layer widths (mlp) or channel counts (conv)
  std::size_t feature_dim = 16;

  void validate() const;
};

// Seeded feature extractor g(x): images [b,c,h,w] -> features [b,d].
// forward() records on a tape for training; forward_values() evaluates the
// identical graph with parameters as constants (teacher / evaluation path).
class FeatureExtractor {
 public:
  FeatureExtractor(ExtractorConfig cfg, std::uint64_t seed);

  FeatureExtractor clone() const;

  VarId forward(Tape& tape, const Tensor& images);
  Tensor forward_values(const Tensor& images) const;

  std::vector<Parameter*> params();
  std::vector<const Parameter*> params() const;
  void set_group(ParamGroup g);
  const ExtractorConfig& config() const { return cfg_; }

 private:
  FeatureExtractor() = default;
  VarId build(Tape& tape, const Tensor& images, const std::vector<VarId>& pvars) const;

  ExtractorConfig cfg_;
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Deployed classification head: one weight column per class, cosine logits
// scaled by a fixed temperature.
struct CosineHead {
  Tensor weight;  // [d, n_classes]
  double scale = 16.0;
  std::size_t num_classes() const { return weight.ndim() == 2 ? weight.dim(1) : 0; }
};

// logits = scale * normalize_rows(features) x normalize_cols(weight).
VarId cosine_logits(Tape& tape, VarId features, VarId weight, double scale);
Tensor cosine_logits_values(const Tensor& features, const Tensor& weight, double scale);
Tensor softmax_values(const Tensor& logits);

// Mean cross-entropy of [b,n] logits against integer labels.
VarId cross_entropy_mean(Tape& tape, VarId logits, const std::vector<int>& labels);

// Rotation by b * 90 degrees counterclockwise; b in [0, num_transforms).
Tensor geometric_transform(const Tensor& image, std::size_t b, std::size_t num_transforms = 4);

struct BaseTrainConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  double lr0 = 0.01;
  double momentum = 0.9;
  double cosine_scale = 16.0;
  std::size_t geo_transforms = 4;  // B >= 2
  double decay = 0.1;              // multiplicative lr decay at the two milestones

  void validate() const;
};

// Step schedule: lr0 decayed at floor(0.75 * epochs) and floor(0.875 * epochs).
double base_lr_at(const BaseTrainConfig& cfg, std::size_t epoch);

// Trains extractor + class head + geometric head in place on the base classes.
// Both heads are cosine classifiers; the geometric head predicts which of the
// B rotations an image went through and is discarded after this call.
void base_train(FeatureExtractor& extractor, Parameter& class_head, Parameter& geo_head,
                const std::vector<Tensor>& images, const std::vector<int>& labels,
                std::size_t n_base, const BaseTrainConfig& cfg, std::uint64_t seed);

// Stacks per-image tensors [c,h,w] into a batch [b,c,h,w].
Tensor stack_images(const std::vector<const Tensor*>& images);

}  // namespace fscil
