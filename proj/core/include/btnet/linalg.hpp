#pragma once

#include <cstddef>
#include <vector>

#include "btnet/geometry.hpp"
#include "btnet/tensor.hpp"

namespace btnet {

/// Singular values of an order-2 tensor, descending.
std::vector<double> singular_values(const DenseTensor& matrix);

/// Numeric rank: number of singular values above 1e-9 * sigma_max.
std::size_t numeric_rank(const DenseTensor& matrix);

/// Rank of the unfolding of an interleaved order-2N weight tensor that
/// keeps the first k (I, J) pairs as rows. 1 <= k < N.
std::size_t pair_unfolding_rank(const DenseTensor& interleaved, std::size_t k);

/// Permute an interleaved (I_1, J_1, ..., I_N, J_N) weight tensor to
/// (J_1..J_N, I_1..I_N) and unfold it to the J x I matrix of y = W x.
DenseTensor interleaved_to_matrix(const DenseTensor& interleaved);

}  // namespace btnet
