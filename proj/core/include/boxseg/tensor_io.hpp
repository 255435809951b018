#pragma once

#include <map>
#include <string>

#include "boxseg/tensor.hpp"

namespace boxseg {

// Single-channel PFM ("Pf"), float32 little-endian, rows stored bottom-to-top.
// Tensor must be 2-D [h, w]; values are narrowed to float on write.
void write_pfm(const std::string& path, const Tensor& t);
Tensor read_pfm(const std::string& path);

// Named-tensor archive used for checkpoints. Layout (all integers little-endian):
//   magic "BSTC0001", u32 entry count, then per entry:
//   u32 name length, name bytes, u32 ndim, ndim x u32 dims, numel x f64 data.
// Entries are written in key order so equal archives are byte-identical.
void write_tensor_archive(const std::string& path, const std::map<std::string, Tensor>& entries);
std::map<std::string, Tensor> read_tensor_archive(const std::string& path);

}  // namespace boxseg
