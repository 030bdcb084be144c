#pragma once

#include "unisparse/types.hpp"

#include <filesystem>

namespace unisparse {

// Binary tensor file: 12-byte magic "unisparse.tn" + u32 version, then u32
// H, L, d_k (little endian), then H*L*d_k little-endian f32 values, head
// major, rows within a head contiguous.
inline constexpr char kTensorMagic[12] = {'u', 'n', 'i', 's', 'p', 'a',
                                          'r', 's', 'e', '.', 't', 'n'};
inline constexpr std::uint32_t kTensorVersion = 1;

struct TensorFile {
  int H = 0;
  int L = 0;
  int d_k = 0;
  HeadStack<float> data;
};

// Throws std::runtime_error naming the path (and byte offset where it
// applies) on any malformed input.
void write_tensor(const std::filesystem::path& path, const HeadStack<float>& data);
TensorFile read_tensor(const std::filesystem::path& path);

}  // namespace unisparse
