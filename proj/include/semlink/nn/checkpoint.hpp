#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "semlink/nn/tensor.hpp"

namespace semlink::nn {

// Parameter checkpoint file, little-endian:
//   magic "SLNN", u32 version, u32 tensor count, then per tensor:
//   u16 name length, name bytes, u8 rank, u32 dims, raw 32-bit floats.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, TensorF>& tensors);

std::map<std::string, TensorF> load_checkpoint(const std::filesystem::path& path);

}  // namespace semlink::nn
