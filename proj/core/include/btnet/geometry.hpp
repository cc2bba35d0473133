#pragma once

#include <cstddef>

#include "btnet/tensor.hpp"

namespace btnet {

/// Paired-mode geometry of a tensorized layer: the I x J weight matrix is
/// viewed as an order-2N tensor with interleaved modes
/// (I_1, J_1, ..., I_N, J_N).
struct LayerGeometry {
    Shape input_dims;   // I_1 .. I_N
    Shape output_dims;  // J_1 .. J_N

    std::size_t order() const { return input_dims.size(); }
    std::size_t input_size() const { return shape_size(input_dims); }
    std::size_t output_size() const { return shape_size(output_dims); }

    /// Shape (I_1, J_1, ..., I_N, J_N) of the reconstructed weight tensor.
    Shape interleaved_shape() const {
        Shape s;
        s.reserve(2 * order());
        for (std::size_t k = 0; k < order(); ++k) {
            s.push_back(input_dims[k]);
            s.push_back(output_dims[k]);
        }
        return s;
    }

    void validate() const {
        if (input_dims.empty() || input_dims.size() != output_dims.size())
            throw ShapeError("layer geometry needs matching, non-empty input/output dims");
        for (std::size_t d : input_dims)
            if (d == 0) throw ShapeError("zero input dim in layer geometry");
        for (std::size_t d : output_dims)
            if (d == 0) throw ShapeError("zero output dim in layer geometry");
    }

    bool operator==(const LayerGeometry&) const = default;
};

}  // namespace btnet
