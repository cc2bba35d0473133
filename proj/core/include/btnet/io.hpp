#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "btnet/tensor.hpp"

namespace btnet {

/// Flat binary tensor format used for test fixtures and checkpoints:
/// u32 little-endian order N, then N u32 dims, then product(dims)
/// 64-bit little-endian floats.
void write_tensor(std::ostream& os, const DenseTensor& t);
DenseTensor read_tensor(std::istream& is);

void write_tensor_file(const std::string& path, const DenseTensor& t);
DenseTensor read_tensor_file(const std::string& path);

void write_u32(std::ostream& os, std::uint32_t v);
std::uint32_t read_u32(std::istream& is);

}  // namespace btnet
