#pragma once

#include <string>
#include <vector>

#include "fscil/autodiff.hpp"
#include "fscil/tensor.hpp"

namespace fscil {

struct NamedTensor {
  std::string id;
  Tensor value;
};

// Weight snapshot format, little-endian:
//   magic "FSW1" | u32 count
//   | per record: u32 id_len, id bytes, u32 ndim, u32 dims..., f64 * count
std::vector<std::uint8_t> serialize_snapshot(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> deserialize_snapshot(const std::vector<std::uint8_t>& bytes);
void save_snapshot(const std::string& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> load_snapshot(const std::string& path);

std::vector<NamedTensor> snapshot_params(const std::vector<const Parameter*>& params);

}  // namespace fscil
