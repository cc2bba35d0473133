#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "btnet/geometry.hpp"
#include "btnet/tensor.hpp"

namespace btnet {

/// Tensor-train representation of an I x J weight matrix over paired
/// (I_k, J_k) modes: a chain of N cores, core k of shape
/// [r_{k-1}, I_k, J_k, r_k] with boundary ranks r_0 = r_N = 1 and a single
/// homogeneous interior rank r. The standard comparison baseline for
/// block-term layers.
struct TtWeight {
    LayerGeometry geometry;
    std::size_t rank = 1;  // interior TT-rank r
    std::vector<DenseTensor> cores;

    static TtWeight init(LayerGeometry geometry, std::size_t rank, std::uint64_t seed);
    static TtWeight zeros(LayerGeometry geometry, std::size_t rank);

    /// Stored scalars; equals sum_k r_{k-1} I_k J_k r_k.
    std::size_t param_count() const;

    /// Bond dimension to the left of core k (r_0 = 1).
    std::size_t left_rank(std::size_t k) const { return k == 0 ? 1 : rank; }
    std::size_t right_rank(std::size_t k) const {
        return k + 1 == geometry.order() ? 1 : rank;
    }

    /// Full order-2N tensor with interleaved shape (I_1, J_1, ..., I_N, J_N).
    DenseTensor reconstruct() const;

    /// The J x I matrix W of y = W x.
    DenseTensor as_matrix() const;

    std::size_t unfolding_rank(std::size_t k) const;

    /// Checkpoint block: u32 header (N, I dims, J dims, r), then the cores.
    void save(std::ostream& os) const;
    static TtWeight load(std::istream& is);
};

}  // namespace btnet
