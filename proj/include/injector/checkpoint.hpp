#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "injector/tensor.hpp"

namespace injector {

// Named-tensor container, little-endian:
//   magic "INJCKPT\0" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u8 dtype (0 = f32)
//               | u32 ndim | i64 dims[ndim] | f32 data (row-major)
// Values are stored as 32-bit floats regardless of in-memory precision.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace injector
