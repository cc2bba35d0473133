#include "btnet/tt_weight.hpp"

#include <cmath>
#include <random>

#include "btnet/io.hpp"
#include "btnet/linalg.hpp"

namespace btnet {

TtWeight TtWeight::zeros(LayerGeometry geometry, std::size_t rank) {
    geometry.validate();
    if (rank < 1) throw std::invalid_argument("TT-rank must be >= 1");
    TtWeight tt;
    tt.geometry = std::move(geometry);
    tt.rank = rank;
    const std::size_t n = tt.geometry.order();
    for (std::size_t k = 0; k < n; ++k) {
        tt.cores.emplace_back(Shape{tt.left_rank(k), tt.geometry.input_dims[k],
                                    tt.geometry.output_dims[k], tt.right_rank(k)});
    }
    return tt;
}

TtWeight TtWeight::init(LayerGeometry geometry, std::size_t rank, std::uint64_t seed) {
    TtWeight tt = zeros(std::move(geometry), rank);
    const std::size_t n = tt.geometry.order();
    // Var(w) = r^(N-1) * prod of per-core variances; aim for 2 / I overall.
    const double paths = std::pow(static_cast<double>(rank), static_cast<double>(n - 1));
    const double var =
        std::pow(2.0 / (static_cast<double>(tt.geometry.input_size()) * paths),
                 1.0 / static_cast<double>(n));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(var));
    for (auto& c : tt.cores)
        for (double& v : c.buffer()) v = gauss(rng);
    return tt;
}

std::size_t TtWeight::param_count() const {
    std::size_t n = 0;
    for (const auto& c : cores) n += c.size();
    return n;
}

DenseTensor TtWeight::reconstruct() const {
    const std::size_t n = geometry.order();
    // Squeeze the unit bond of the first core, then chain the rest over
    // the running rightmost rank mode.
    DenseTensor t = cores[0].reshape(Shape(cores[0].shape().begin() + 1,
                                           cores[0].shape().end()));
    for (std::size_t k = 1; k < n; ++k)
        t = contract(t, cores[k], {{t.order() - 1, 0}});
    // Trailing r_N = 1 mode.
    Shape s = t.shape();
    s.pop_back();
    return t.reshape(s);
}

DenseTensor TtWeight::as_matrix() const { return interleaved_to_matrix(reconstruct()); }

std::size_t TtWeight::unfolding_rank(std::size_t k) const {
    return pair_unfolding_rank(reconstruct(), k);
}

void TtWeight::save(std::ostream& os) const {
    const std::size_t n = geometry.order();
    write_u32(os, static_cast<std::uint32_t>(n));
    for (std::size_t d : geometry.input_dims) write_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t d : geometry.output_dims) write_u32(os, static_cast<std::uint32_t>(d));
    write_u32(os, static_cast<std::uint32_t>(rank));
    for (const auto& c : cores) write_tensor(os, c);
}

TtWeight TtWeight::load(std::istream& is) {
    const std::size_t n = read_u32(is);
    LayerGeometry geom;
    geom.input_dims.resize(n);
    geom.output_dims.resize(n);
    for (auto& d : geom.input_dims) d = read_u32(is);
    for (auto& d : geom.output_dims) d = read_u32(is);
    const std::size_t r = read_u32(is);
    TtWeight tt = zeros(std::move(geom), r);
    for (auto& c : tt.cores) {
        DenseTensor t = read_tensor(is);
        if (!t.same_shape(c)) throw std::runtime_error("TT checkpoint core shape mismatch");
        c = std::move(t);
    }
    return tt;
}

}  // namespace btnet
