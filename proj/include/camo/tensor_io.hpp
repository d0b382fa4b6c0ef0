#pragma once

#include <filesystem>
#include <iosfwd>

#include "camo/tensor.hpp"

namespace camo {

// Dump layout: 8-byte magic "CST5TENS", five little-endian u64 extents
// (N, C, T, H, W), then the payload as little-endian IEEE-754 f64.
inline constexpr char kTensorMagic[8] = {'C', 'S', 'T', '5', 'T', 'E', 'N', 'S'};

void write_tensor(std::ostream& os, const Tensor5& x);
Tensor5 read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor5& x);
Tensor5 load_tensor(const std::filesystem::path& path);

}  // namespace camo
