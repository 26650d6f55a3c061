#pragma once

#include <optional>

#include "fscil/prototypes.hpp"

namespace fscil {

// Weights of the auxiliary terms in the total session loss.
struct LossWeights {
  double old_cls = 1.2;   // weight of the old-head prototype classification term
  double distill = 10.0;  // weight of the amplified-data distillation pair

  void validate() const;
};

// Classification loss of the working (composed) head: mean cross-entropy on
// the session images plus mean cross-entropy on all buffered prototypes fed
// straight into the head (the extractor is bypassed for prototypes).
VarId loss_cls(Tape& tape, FeatureExtractor& extractor, VarId head_weight, double scale,
               const Tensor& images, const std::vector<int>& labels,
               const PrototypeBuffer& buffer);

// Keeps the slow old-head bank anchored: mean cross-entropy of the buffered
// prototypes under the old bank alone. Gradients reach only that bank.
VarId loss_cls_old(Tape& tape, VarId old_bank, double scale, const PrototypeBuffer& buffer);

// Mean Euclidean distance between teacher and student features on the
// amplified batch. Teacher rows are constants.
VarId loss_feat(Tape& tape, const Tensor& teacher_features, VarId student_features);

// Mean soft cross-entropy of the teacher distribution against the student
// softmax over the previous-session class range. Teacher rows are constants.
VarId loss_logit(Tape& tape, const Tensor& teacher_probs, VarId student_logits);

// total = cls + old_cls * cls_old + distill * adkd, with absent terms dropped.
VarId loss_total(Tape& tape, VarId cls, std::optional<VarId> cls_old, std::optional<VarId> adkd,
                 const LossWeights& weights);

}  // namespace fscil
