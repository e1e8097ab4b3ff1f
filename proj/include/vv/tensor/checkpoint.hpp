#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vv/tensor/tensor.hpp"

// Checkpoint layout (all integers little-endian uint64, values little-endian
// IEEE-754 doubles):
//
//   "VVCKPT1\n"                      8-byte magic
//   repeated until end of file:
//     name_length, name bytes (no terminator)
//     rank, dims[rank]
//     prod(dims) raw doubles, row-major
//
// Entries keep their insertion order.

namespace vv {

struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr char kCheckpointMagic[] = "VVCKPT1\n";

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace vv
