#include "btnet/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace btnet {

std::vector<double> singular_values(const DenseTensor& matrix) {
    if (matrix.order() != 2) throw ShapeError("singular_values expects an order-2 tensor");
    const auto rows = static_cast<Eigen::Index>(matrix.dim(0));
    const auto cols = static_cast<Eigen::Index>(matrix.dim(1));
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        m(matrix.data(), rows, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    return {sv.data(), sv.data() + sv.size()};
}

std::size_t numeric_rank(const DenseTensor& matrix) {
    const auto sv = singular_values(matrix);
    if (sv.empty() || sv.front() == 0.0) return 0;
    const double cutoff = 1e-9 * sv.front();
    std::size_t rank = 0;
    for (double s : sv)
        if (s > cutoff) ++rank;
    return rank;
}

std::size_t pair_unfolding_rank(const DenseTensor& interleaved, std::size_t k) {
    if (interleaved.order() % 2 != 0)
        throw ShapeError("pair unfolding expects an order-2N tensor");
    const std::size_t n_pairs = interleaved.order() / 2;
    if (k < 1 || k >= n_pairs)
        throw std::invalid_argument("pair split point must satisfy 1 <= k < N");
    ModeSplit split;
    for (std::size_t m = 0; m < 2 * k; ++m) split.row_modes.push_back(m);
    for (std::size_t m = 2 * k; m < 2 * n_pairs; ++m) split.col_modes.push_back(m);
    return numeric_rank(interleaved.unfold(split));
}

DenseTensor interleaved_to_matrix(const DenseTensor& interleaved) {
    if (interleaved.order() % 2 != 0)
        throw ShapeError("interleaved weight must have even order");
    const std::size_t n = interleaved.order() / 2;
    std::vector<std::size_t> perm;
    perm.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) perm.push_back(2 * k + 1);  // J_k
    for (std::size_t k = 0; k < n; ++k) perm.push_back(2 * k);      // I_k
    DenseTensor t = interleaved.permute(perm);
    ModeSplit split;
    for (std::size_t m = 0; m < n; ++m) split.row_modes.push_back(m);
    for (std::size_t m = n; m < 2 * n; ++m) split.col_modes.push_back(m);
    return t.unfold(split);
}

}  // namespace btnet
