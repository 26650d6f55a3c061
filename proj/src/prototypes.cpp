#include "fscil/prototypes.hpp"

namespace fscil {

void PrototypeBuffer::insert(int cls, Tensor prototype) {
  if (cls < 0) throw DataError("prototype buffer: negative class id");
  if (prototype.ndim() != 1 || prototype.size() == 0) {
    throw ConfigError("prototype buffer: prototype must be a nonempty vector");
  }
  if (!entries_.empty() && entries_.begin()->second.size() != prototype.size()) {
    throw ConfigError("prototype buffer: feature dim mismatch");
  }
  auto [it, inserted] = entries_.emplace(cls, std::move(prototype));
  if (!inserted) {
    throw ContractViolation("prototype buffer: class " + std::to_string(cls) +
                            " already has a prototype");
  }
}

const Tensor& PrototypeBuffer::at(int cls) const {
  auto it = entries_.find(cls);
  if (it == entries_.end()) {
    throw DataError("prototype buffer: no prototype for class " + std::to_string(cls));
  }
  return it->second;
}

Tensor PrototypeBuffer::as_matrix() const {
  if (entries_.empty()) throw DataError("prototype buffer: empty");
  std::size_t d = entries_.begin()->second.size();
  Tensor m({entries_.size(), d});
  std::size_t r = 0;
  for (const auto& [cls, proto] : entries_) {
    for (std::size_t c = 0; c < d; ++c) m(r, c) = proto[c];
    ++r;
  }
  return m;
}

std::vector<int> PrototypeBuffer::labels() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& [cls, proto] : entries_) out.push_back(cls);
  return out;
}

std::map<int, Tensor> compute_prototypes(
    const FeatureExtractor& extractor,
    const std::map<int, std::vector<const Tensor*>>& class_examples) {
  std::map<int, Tensor> out;
  for (const auto& [cls, examples] : class_examples) {
    if (examples.empty()) {
      throw DataError("compute_prototypes: class " + std::to_string(cls) + " has no examples");
    }
    Tensor feats = extractor.forward_values(stack_images(examples));
    std::size_t n = feats.dim(0), d = feats.dim(1);
    Tensor mean({d});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) mean[c] += feats(r, c);
    }
    for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(n);
    out.emplace(cls, std::move(mean));
  }
  return out;
}

}  // namespace fscil
