#pragma once

#include <string>
#include <vector>

#include "btnet/geometry.hpp"

namespace btnet {

/// One compressed-layer configuration, e.g. "1-BT2" or "TT8".
struct ArchSpec {
    enum class Kind { Fc, Bt, Tt } kind = Kind::Fc;
    std::size_t cp_rank = 1;
    std::size_t tucker_rank = 1;
    std::size_t tt_rank = 1;

    std::string label() const;
    /// Parse "baseline" / "fc", "TTr", or "x-BTy".
    static ArchSpec parse(const std::string& text);
};

/// A named layer geometry with its standard comparison architectures.
struct Preset {
    std::string name;
    LayerGeometry geometry;
    std::vector<ArchSpec> archs;
};

/// mnist: 800x500 as (5,5,8,4)->(5,5,5,4); cifar10: 2304x384 as
/// (6,6,8,8)->(6,4,4,4); imagenet: 6400x4096 as (10,10,8,8)->(8,8,8,8).
const Preset& preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace btnet
