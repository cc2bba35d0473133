#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "btnet/geometry.hpp"
#include "btnet/tensor.hpp"

namespace btnet {

/// Block-term representation of an I x J weight matrix viewed as an
/// order-2N tensor with paired (I_k, J_k) modes: a sum of cp_rank Tucker
/// blocks, each with homogeneous Tucker-rank tucker_rank.
///
/// factor k has shape [R_C, I_k, J_k, R_T]; the core has shape
/// [R_C, R_T, ..., R_T] (N trailing R_T modes).
struct BtWeight {
    LayerGeometry geometry;
    std::size_t cp_rank = 1;      // R_C, number of Tucker blocks
    std::size_t tucker_rank = 1;  // R_T, bond between factors and core
    std::vector<DenseTensor> factors;
    DenseTensor core;

    /// Variance-balanced Gaussian init: every factor and the core get the
    /// same per-tensor sigma so the reconstructed matrix has approximate
    /// element variance 2 / I. Deterministic given the seed.
    static BtWeight init(LayerGeometry geometry, std::size_t cp_rank,
                         std::size_t tucker_rank, std::uint64_t seed);

    /// Zero-filled weight with the right buffer shapes.
    static BtWeight zeros(LayerGeometry geometry, std::size_t cp_rank,
                          std::size_t tucker_rank);

    /// Number of stored scalars, counted from the actual buffers. Equals
    /// the closed form R_C (sum_k I_k J_k R_T + R_T^N).
    std::size_t param_count() const;

    /// Contiguous [I_k, J_k, R_T] view of block `block` of factor k.
    DenseTensor factor_slice(std::size_t k, std::size_t block) const;
    /// Contiguous [R_T, ..., R_T] core of block `block`.
    DenseTensor core_slice(std::size_t block) const;

    /// Full order-2N tensor with interleaved shape (I_1, J_1, ..., I_N, J_N).
    DenseTensor reconstruct() const;

    /// The J x I matrix W of y = W x.
    DenseTensor as_matrix() const;

    /// Numeric rank of the unfolding keeping the first k pairs as rows.
    std::size_t unfolding_rank(std::size_t k) const;

    /// Checkpoint block: u32 header (N, I dims, J dims, R_C, R_T), then
    /// each factor and the core in the flat tensor format.
    void save(std::ostream& os) const;
    static BtWeight load(std::istream& is);
};

}  // namespace btnet
