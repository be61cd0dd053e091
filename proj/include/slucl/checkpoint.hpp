#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slucl/autodiff.hpp"

namespace slucl {

// Checkpoints are a pair of files: "<stem>.manifest" (UTF-8 text listing
// parameter names, shapes, and byte offsets) and "<stem>.bin" (little-endian
// 64-bit floats in manifest order). Round trips are bit-exact.

void save_checkpoint(const std::string& stem, const std::vector<NamedTensor>& params);

struct CheckpointEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

std::vector<CheckpointEntry> load_checkpoint(const std::string& stem);

// Restore by name into existing tensors; every checkpoint entry must match a
// parameter of identical shape and vice versa.
void load_checkpoint_into(const std::string& stem, const std::vector<NamedTensor>& params);

// FNV-1a over the manifest text and the value bytes; changes iff any name,
// shape, or value bit changes.
std::uint64_t parameter_hash(const std::vector<NamedTensor>& params);

}  // namespace slucl
