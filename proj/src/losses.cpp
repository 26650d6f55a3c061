#include "fscil/losses.hpp"

namespace fscil {

void LossWeights::validate() const {
  if (old_cls < 0.0 || distill < 0.0) throw ConfigError("loss weights must be nonnegative");
}

VarId loss_cls(Tape& tape, FeatureExtractor& extractor, VarId head_weight, double scale,
               const Tensor& images, const std::vector<int>& labels,
               const PrototypeBuffer& buffer) {
  if (images.ndim() != 4 || images.dim(0) == 0) {
    throw DataError("loss_cls: image batch must be nonempty [b,c,h,w]");
  }
  std::size_t n_total = tape.val(head_weight).dim(1);
  VarId feats = extractor.forward(tape, images);
  VarId out = cross_entropy_mean(tape, cosine_logits(tape, feats, head_weight, scale), labels);
  if (!buffer.empty()) {
    std::vector<int> proto_labels = buffer.labels();
    for (int l : proto_labels) {
      if (static_cast<std::size_t>(l) >= n_total) {
        throw DataError("loss_cls: prototype class " + std::to_string(l) +
                        " outside head range");
      }
    }
    VarId proto_logits =
        cosine_logits(tape, tape.constant(buffer.as_matrix()), head_weight, scale);
    out = tape.add(out, cross_entropy_mean(tape, proto_logits, proto_labels));
  }
  return out;
}

VarId loss_cls_old(Tape& tape, VarId old_bank, double scale, const PrototypeBuffer& buffer) {
  const Tensor& W = tape.val(old_bank);
  if (W.ndim() != 2) throw ConfigError("loss_cls_old: old bank must be [d, n_prev]");
  std::size_t n_prev = W.dim(1);
  if (buffer.size() != n_prev) {
    throw ConfigError("loss_cls_old: buffer has " + std::to_string(buffer.size()) +
                      " prototypes but the old bank covers " + std::to_string(n_prev) +
                      " classes");
  }
  std::vector<int> labels = buffer.labels();
  for (int l : labels) {
    if (static_cast<std::size_t>(l) >= n_prev) {
      throw ConfigError("loss_cls_old: prototype class outside the old-head range");
    }
  }
  VarId logits = cosine_logits(tape, tape.constant(buffer.as_matrix()), old_bank, scale);
  return cross_entropy_mean(tape, logits, labels);
}

VarId loss_feat(Tape& tape, const Tensor& teacher_features, VarId student_features) {
  const Tensor& S = tape.val(student_features);
  if (!teacher_features.same_shape(S)) {
    throw ConfigError("loss_feat: teacher " + teacher_features.shape_str() +
                      " vs student " + S.shape_str());
  }
  if (teacher_features.ndim() != 2 || teacher_features.dim(0) == 0) {
    throw DataError("loss_feat: features must be a nonempty [b,d] batch");
  }
  VarId diff = tape.sub(tape.constant(teacher_features), student_features);
  return tape.mean(tape.sqrt(tape.sqnorm_rows(diff)));
}

VarId loss_logit(Tape& tape, const Tensor& teacher_probs, VarId student_logits) {
  const Tensor& S = tape.val(student_logits);
  if (!teacher_probs.same_shape(S)) {
    throw ConfigError("loss_logit: teacher " + teacher_probs.shape_str() + " vs student " +
                      S.shape_str());
  }
  if (teacher_probs.ndim() != 2 || teacher_probs.dim(0) == 0) {
    throw DataError("loss_logit: probabilities must be a nonempty [b,n] batch");
  }
  std::size_t b = teacher_probs.dim(0);
  VarId picked = tape.mul(tape.log(tape.softmax_rows(student_logits)),
                          tape.constant(teacher_probs));
  return tape.scale(tape.sum(picked), -1.0 / static_cast<double>(b));
}

VarId loss_total(Tape& tape, VarId cls, std::optional<VarId> cls_old, std::optional<VarId> adkd,
                 const LossWeights& weights) {
  weights.validate();
  VarId total = cls;
  if (cls_old) total = tape.add(total, tape.scale(*cls_old, weights.old_cls));
  if (adkd) total = tape.add(total, tape.scale(*adkd, weights.distill));
  return total;
}

}  // namespace fscil
