#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace btnet {

/// Thrown when tensor shapes disagree (reshape size mismatch, contraction
/// dimension mismatch, ...).
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Mode-(r, c) unfolding descriptor. Modes are 0-based here; the public
/// documentation follows the usual 1-based convention, conversion happens
/// at call sites.
struct ModeSplit {
    std::vector<std::size_t> row_modes;
    std::vector<std::size_t> col_modes;
};

/// Dense order-N tensor with a row-major (last index fastest) buffer.
/// Order 0 is a scalar with a single element. Instances are plain values;
/// all operations below return fresh tensors and never alias their inputs,
/// so shared reads are thread-safe.
class DenseTensor {
public:
    DenseTensor() : data_(1, 0.0) {}  // order-0 zero scalar
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> data);

    static DenseTensor scalar(double v);

    std::size_t order() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    const Shape& shape() const { return shape_; }
    std::size_t dim(std::size_t mode) const { return shape_.at(mode); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& buffer() { return data_; }
    const std::vector<double>& buffer() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& at(std::span<const std::size_t> idx);
    double at(std::span<const std::size_t> idx) const;

    /// Row-major flat offset of a multi-index.
    std::size_t offset(std::span<const std::size_t> idx) const;

    /// Same buffer, new shape. Sizes must agree.
    DenseTensor reshape(Shape new_shape) const;

    /// Gather permutation: out mode m is this tensor's mode perm[m].
    DenseTensor permute(const std::vector<std::size_t>& perm) const;

    /// Mode-(r, c) unfolding into an order-2 tensor. Row index is the
    /// lexicographic combination of the row modes in split order (first
    /// listed mode slowest); same for columns.
    DenseTensor unfold(const ModeSplit& split) const;

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Pairwise tensor contraction: sum over the paired modes of the product.
/// Output modes are a's free modes (in a's order) followed by b's free
/// modes. Realized as unfold both sides, matrix-multiply, reshape.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// Adjoint of contract: given d(output), produce (d a, d b) with the
/// original shapes. Used to back-propagate through any forward contraction.
std::pair<DenseTensor, DenseTensor>
contract_backward(const DenseTensor& a, const DenseTensor& b,
                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                  const DenseTensor& grad_out);

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm);

/// C[m x n] = A[m x k] * B[k x n], row-major. Deterministic for any thread
/// count (rows are partitioned, each output element is written once).
void matmul(const double* a, std::size_t m, std::size_t k,
            const double* b, std::size_t n, double* c);
/// C = A * B^T with B[n x k].
void matmul_nt(const double* a, std::size_t m, std::size_t k,
               const double* b, std::size_t n, double* c);
/// C = A^T * B with A[k x m].
void matmul_tn(const double* a, std::size_t m, std::size_t k,
               const double* b, std::size_t n, double* c);

/// Run fn(0..n-1) with the current thread budget; work items must write
/// disjoint outputs. Deterministic for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Upper bound on worker threads used by matmul. 1 (the default) is the
/// serial mode required for bit-exact verification runs; results are
/// identical for any setting.
void set_max_threads(unsigned n);
unsigned max_threads();

namespace flops {
/// Running count of scalar multiplications performed by contraction
/// matmuls since the last reset.
void reset();
std::uint64_t multiplies();
void add(std::uint64_t n);
}  // namespace flops

}  // namespace btnet
