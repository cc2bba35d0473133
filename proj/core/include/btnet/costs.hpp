#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btnet/geometry.hpp"

namespace btnet::costs {

/// Closed-form BT-layer parameter count: R_C (sum_k I_k J_k R_T + R_T^N).
std::uint64_t bt_param_count(const LayerGeometry& geom, std::size_t cp_rank,
                             std::size_t tucker_rank);

/// Closed-form TT-layer parameter count: sum_k r_{k-1} I_k J_k r_k with
/// boundary ranks 1.
std::uint64_t tt_param_count(const LayerGeometry& geom, std::size_t rank);

std::uint64_t fc_param_count(const LayerGeometry& geom);

/// Exact multiplication count of the BT forward contraction schedule for
/// one sample:
///   R_C ( sum_{k=1}^N prod_{m<=k} J_m * prod_{n>=k} I_n * R_T^k
///         + J * R_T^N ).
std::uint64_t bt_forward_flops(const LayerGeometry& geom, std::size_t cp_rank,
                               std::size_t tucker_rank);

/// Exact multiplication count of the TT left-to-right schedule for one
/// sample (analytic companion value, reported but not part of the BT
/// identity check).
std::uint64_t tt_forward_flops(const LayerGeometry& geom, std::size_t rank);

/// Dense y = W x multiply count: I * J.
std::uint64_t fc_forward_flops(const LayerGeometry& geom);

/// Compression ratio n_original / n_compressed, floored to an integer as
/// reported in comparison tables.
std::uint64_t compression_ratio(std::uint64_t n_original, std::uint64_t n_compressed);
/// The same ratio without rounding.
double compression_ratio_exact(std::uint64_t n_original, std::uint64_t n_compressed);

/// m = max_k max(I_k, J_k).
std::size_t mode_bound(const LayerGeometry& geom);

/// One row of the complexity comparison report: substituted magnitudes of
/// the asymptotic time/memory classes plus exact parameter counts.
struct ComplexityRow {
    std::string operation;       // e.g. "BT forward"
    std::string time_class;      // the O-expression as text
    std::uint64_t time_order;    // substituted magnitude, order only
    std::string memory_class;
    std::uint64_t memory_order;
    std::uint64_t params;
};

/// Substituted comparison rows for FC / TT / BT forward and backward at a
/// given geometry. time_order values are order-of-magnitude figures, not
/// exact FLOP counts.
std::vector<ComplexityRow> complexity_report(const LayerGeometry& geom,
                                             std::size_t cp_rank,
                                             std::size_t tucker_rank,
                                             std::size_t tt_rank);

std::string format_complexity_report(const std::vector<ComplexityRow>& rows);

}  // namespace btnet::costs
