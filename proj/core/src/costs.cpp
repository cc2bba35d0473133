#include "btnet/costs.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace btnet::costs {

namespace {
std::uint64_t ipow(std::uint64_t base, std::uint64_t exp) {
    std::uint64_t r = 1;
    while (exp--) r *= base;
    return r;
}
}  // namespace

std::uint64_t bt_param_count(const LayerGeometry& geom, std::size_t cp_rank,
                             std::size_t tucker_rank) {
    geom.validate();
    const std::size_t n = geom.order();
    std::uint64_t factors = 0;
    for (std::size_t k = 0; k < n; ++k)
        factors += static_cast<std::uint64_t>(geom.input_dims[k]) * geom.output_dims[k] *
                   tucker_rank;
    return cp_rank * (factors + ipow(tucker_rank, n));
}

std::uint64_t tt_param_count(const LayerGeometry& geom, std::size_t rank) {
    geom.validate();
    const std::size_t n = geom.order();
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t left = (k == 0) ? 1 : rank;
        const std::uint64_t right = (k + 1 == n) ? 1 : rank;
        total += left * geom.input_dims[k] * geom.output_dims[k] * right;
    }
    return total;
}

std::uint64_t fc_param_count(const LayerGeometry& geom) {
    return static_cast<std::uint64_t>(geom.input_size()) * geom.output_size();
}

std::uint64_t bt_forward_flops(const LayerGeometry& geom, std::size_t cp_rank,
                               std::size_t tucker_rank) {
    geom.validate();
    const std::size_t n = geom.order();
    std::uint64_t per_block = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        std::uint64_t term = ipow(tucker_rank, k);
        for (std::size_t m = 0; m < k; ++m) term *= geom.output_dims[m];
        for (std::size_t i = k - 1; i < n; ++i) term *= geom.input_dims[i];
        per_block += term;
    }
    per_block += static_cast<std::uint64_t>(geom.output_size()) * ipow(tucker_rank, n);
    return cp_rank * per_block;
}

std::uint64_t tt_forward_flops(const LayerGeometry& geom, std::size_t rank) {
    geom.validate();
    const std::size_t n = geom.order();
    // Step k contracts (I_k, r_{k-1}) against core k, emitting (J_k, r_k):
    // rows = prod_{i>k} I_i * prod_{m<k} J_m, inner = I_k r_{k-1},
    // cols = J_k r_k.
    std::uint64_t total = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        std::uint64_t rows = 1;
        for (std::size_t i = k; i < n; ++i) rows *= geom.input_dims[i];
        for (std::size_t m = 0; m + 1 < k; ++m) rows *= geom.output_dims[m];
        const std::uint64_t left = (k == 1) ? 1 : rank;
        const std::uint64_t right = (k == n) ? 1 : rank;
        total += rows * geom.input_dims[k - 1] * left * geom.output_dims[k - 1] * right;
    }
    return total;
}

std::uint64_t fc_forward_flops(const LayerGeometry& geom) {
    return static_cast<std::uint64_t>(geom.input_size()) * geom.output_size();
}

std::uint64_t compression_ratio(std::uint64_t n_original, std::uint64_t n_compressed) {
    if (n_original == 0 || n_compressed == 0)
        throw std::invalid_argument("compression ratio needs positive parameter counts");
    return n_original / n_compressed;
}

double compression_ratio_exact(std::uint64_t n_original, std::uint64_t n_compressed) {
    if (n_original == 0 || n_compressed == 0)
        throw std::invalid_argument("compression ratio needs positive parameter counts");
    return static_cast<double>(n_original) / static_cast<double>(n_compressed);
}

std::size_t mode_bound(const LayerGeometry& geom) {
    std::size_t m = 1;
    for (std::size_t d : geom.input_dims) m = std::max(m, d);
    for (std::size_t d : geom.output_dims) m = std::max(m, d);
    return m;
}

std::vector<ComplexityRow> complexity_report(const LayerGeometry& geom,
                                             std::size_t cp_rank,
                                             std::size_t tucker_rank,
                                             std::size_t tt_rank) {
    geom.validate();
    const std::uint64_t i = geom.input_size(), j = geom.output_size();
    const std::uint64_t n = geom.order();
    const std::uint64_t m = mode_bound(geom);
    const std::uint64_t mx = std::max(i, j);
    const std::uint64_t rt_n = ipow(tucker_rank, n);
    const std::uint64_t r = tt_rank;

    std::vector<ComplexityRow> rows;
    rows.push_back({"FC forward", "O(IJ)", i * j, "O(IJ)", i * j, fc_param_count(geom)});
    rows.push_back({"FC backward", "O(IJ)", i * j, "O(IJ)", i * j, fc_param_count(geom)});
    rows.push_back({"TT forward", "O(N r^2 m max{I,J})", n * r * r * m * mx,
                    "O(r max{I,J})", r * mx, tt_param_count(geom, tt_rank)});
    rows.push_back({"TT backward", "O(N^2 r^4 m max{I,J})", n * n * r * r * r * r * m * mx,
                    "O(r^3 max{I,J})", r * r * r * mx, tt_param_count(geom, tt_rank)});
    rows.push_back({"BT forward", "O(R_C N (R_T)^N m max{I,J})",
                    cp_rank * n * rt_n * m * mx, "O((R_T)^N max{I,J})", rt_n * mx,
                    bt_param_count(geom, cp_rank, tucker_rank)});
    rows.push_back({"BT backward", "O(R_C N^2 (R_T)^N m max{I,J})",
                    cp_rank * n * n * rt_n * m * mx, "O((R_T)^N max{I,J})", rt_n * mx,
                    bt_param_count(geom, cp_rank, tucker_rank)});
    return rows;
}

std::string format_complexity_report(const std::vector<ComplexityRow>& rows) {
    std::ostringstream os;
    os << "operation     time class                     time(order)     memory(order)  params\n";
    for (const auto& r : rows) {
        os << r.operation;
        for (std::size_t p = r.operation.size(); p < 14; ++p) os << ' ';
        os << r.time_class;
        for (std::size_t p = r.time_class.size(); p < 31; ++p) os << ' ';
        std::string t = std::to_string(r.time_order);
        os << t;
        for (std::size_t p = t.size(); p < 16; ++p) os << ' ';
        std::string mem = std::to_string(r.memory_order);
        os << mem;
        for (std::size_t p = mem.size(); p < 15; ++p) os << ' ';
        os << r.params << "\n";
    }
    return os.str();
}

}  // namespace btnet::costs
