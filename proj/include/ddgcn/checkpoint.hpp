#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

// Flat key -> array container. Layout: a magic line, a line with the record
// count, then per record one header line "key dim0 dim1 ..." followed by
// numel little-endian 64-bit floats and a terminating newline. Keys may not
// contain whitespace. Written bytes are a pure function of the entries, so
// identical parameters give identical files.
struct CheckpointEntry {
  std::string key;
  Shape shape;
  std::vector<double> values;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries);

std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// Copies stored values into the listed tensors. The file must hold exactly
// the listed keys with matching shapes, in any order; DataError otherwise.
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries);

}  // namespace ddgcn
