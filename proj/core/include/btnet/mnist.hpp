#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btnet/tensor.hpp"

namespace btnet::mnist {

/// Raised on bad magic numbers, truncation or count mismatches; carries
/// the byte offset of the failure.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

struct Dataset {
    DenseTensor images;       // (count, 1, rows, cols), pixels scaled to [0, 1]
    std::vector<int> labels;  // 0..9
    std::size_t count() const { return labels.size(); }
};

/// Load an IDX image/label file pair (big-endian u32 magic 0x00000803 /
/// 0x00000801 headers, raw u8 payload).
Dataset load(const std::string& images_path, const std::string& labels_path);

/// Write a dataset back out in IDX format (test fixtures).
void save_idx(const std::string& images_path, const std::string& labels_path,
              const std::vector<std::uint8_t>& pixels, std::size_t rows, std::size_t cols,
              const std::vector<std::uint8_t>& labels);

}  // namespace btnet::mnist
