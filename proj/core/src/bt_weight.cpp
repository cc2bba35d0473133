#include "btnet/bt_weight.hpp"

#include <cmath>
#include <random>

#include "btnet/io.hpp"
#include "btnet/linalg.hpp"

namespace btnet {

BtWeight BtWeight::zeros(LayerGeometry geometry, std::size_t cp_rank,
                         std::size_t tucker_rank) {
    geometry.validate();
    if (cp_rank < 1 || tucker_rank < 1)
        throw std::invalid_argument("BT ranks must be >= 1");
    BtWeight bt;
    bt.geometry = std::move(geometry);
    bt.cp_rank = cp_rank;
    bt.tucker_rank = tucker_rank;
    const std::size_t n = bt.geometry.order();
    bt.factors.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        bt.factors.emplace_back(Shape{cp_rank, bt.geometry.input_dims[k],
                                      bt.geometry.output_dims[k], tucker_rank});
    }
    Shape core_shape{cp_rank};
    core_shape.insert(core_shape.end(), n, tucker_rank);
    bt.core = DenseTensor(core_shape);
    return bt;
}

BtWeight BtWeight::init(LayerGeometry geometry, std::size_t cp_rank,
                        std::size_t tucker_rank, std::uint64_t seed) {
    BtWeight bt = zeros(std::move(geometry), cp_rank, tucker_rank);
    const std::size_t n = bt.geometry.order();
    // Var(w) = R_C * R_T^N * prod of per-tensor variances over the N
    // factors and the core; split the 2/I target evenly over N+1 tensors.
    const double paths =
        static_cast<double>(cp_rank) * std::pow(static_cast<double>(tucker_rank), n);
    const double var =
        std::pow(2.0 / (static_cast<double>(bt.geometry.input_size()) * paths),
                 1.0 / static_cast<double>(n + 1));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(var));
    for (auto& f : bt.factors)
        for (double& v : f.buffer()) v = gauss(rng);
    for (double& v : bt.core.buffer()) v = gauss(rng);
    return bt;
}

std::size_t BtWeight::param_count() const {
    std::size_t n = core.size();
    for (const auto& f : factors) n += f.size();
    return n;
}

DenseTensor BtWeight::factor_slice(std::size_t k, std::size_t block) const {
    const DenseTensor& f = factors.at(k);
    const std::size_t len = f.size() / cp_rank;
    std::vector<double> data(f.data() + block * len, f.data() + (block + 1) * len);
    return DenseTensor(Shape(f.shape().begin() + 1, f.shape().end()), std::move(data));
}

DenseTensor BtWeight::core_slice(std::size_t block) const {
    const std::size_t len = core.size() / cp_rank;
    std::vector<double> data(core.data() + block * len, core.data() + (block + 1) * len);
    return DenseTensor(Shape(core.shape().begin() + 1, core.shape().end()), std::move(data));
}

DenseTensor BtWeight::reconstruct() const {
    const std::size_t n = geometry.order();
    DenseTensor sum(geometry.interleaved_shape());
    for (std::size_t c = 0; c < cp_rank; ++c) {
        // Absorb one factor at a time into the block core; the leading
        // mode of the running tensor is always the next R_T bond.
        DenseTensor t = core_slice(c);
        for (std::size_t k = 0; k < n; ++k)
            t = contract(t, factor_slice(k, c), {{0, 2}});
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += t[i];
    }
    return sum;
}

DenseTensor BtWeight::as_matrix() const { return interleaved_to_matrix(reconstruct()); }

std::size_t BtWeight::unfolding_rank(std::size_t k) const {
    return pair_unfolding_rank(reconstruct(), k);
}

void BtWeight::save(std::ostream& os) const {
    const std::size_t n = geometry.order();
    write_u32(os, static_cast<std::uint32_t>(n));
    for (std::size_t d : geometry.input_dims) write_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t d : geometry.output_dims) write_u32(os, static_cast<std::uint32_t>(d));
    write_u32(os, static_cast<std::uint32_t>(cp_rank));
    write_u32(os, static_cast<std::uint32_t>(tucker_rank));
    for (const auto& f : factors) write_tensor(os, f);
    write_tensor(os, core);
}

BtWeight BtWeight::load(std::istream& is) {
    const std::size_t n = read_u32(is);
    LayerGeometry geom;
    geom.input_dims.resize(n);
    geom.output_dims.resize(n);
    for (auto& d : geom.input_dims) d = read_u32(is);
    for (auto& d : geom.output_dims) d = read_u32(is);
    const std::size_t rc = read_u32(is);
    const std::size_t rt = read_u32(is);
    BtWeight bt = zeros(std::move(geom), rc, rt);
    for (auto& f : bt.factors) {
        DenseTensor t = read_tensor(is);
        if (!t.same_shape(f)) throw std::runtime_error("BT checkpoint factor shape mismatch");
        f = std::move(t);
    }
    DenseTensor c = read_tensor(is);
    if (!c.same_shape(bt.core)) throw std::runtime_error("BT checkpoint core shape mismatch");
    bt.core = std::move(c);
    return bt;
}

}  // namespace btnet
