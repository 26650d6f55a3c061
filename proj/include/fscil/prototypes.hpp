#pragma once

#include <map>
#include <vector>

#include "fscil/model.hpp"

namespace fscil {

// One mean-feature entry per seen class. Entries are write-once: a prototype
// is computed with the extractor of the session where its class first appears
// and never recomputed. Ordered iteration keeps downstream math deterministic.
class PrototypeBuffer {
 public:
  void insert(int cls, Tensor prototype);
  bool contains(int cls) const { return entries_.count(cls) != 0; }
  const Tensor& at(int cls) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // [size, d] matrix of prototypes in ascending class order plus the labels.
  Tensor as_matrix() const;
  std::vector<int> labels() const;

 private:
  std::map<int, Tensor> entries_;
};

// Mean feature per class under the given extractor.
std::map<int, Tensor> compute_prototypes(
    const FeatureExtractor& extractor,
    const std::map<int, std::vector<const Tensor*>>& class_examples);

}  // namespace fscil
