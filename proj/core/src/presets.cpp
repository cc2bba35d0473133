#include "btnet/presets.hpp"

#include <stdexcept>

namespace btnet {

std::string ArchSpec::label() const {
    switch (kind) {
        case Kind::Fc: return "baseline";
        case Kind::Tt: return "TT" + std::to_string(tt_rank);
        case Kind::Bt:
            return std::to_string(cp_rank) + "-BT" + std::to_string(tucker_rank);
    }
    return "?";
}

ArchSpec ArchSpec::parse(const std::string& text) {
    ArchSpec spec;
    if (text == "baseline" || text == "fc" || text == "FC") {
        spec.kind = Kind::Fc;
        return spec;
    }
    if (text.rfind("TT", 0) == 0) {
        spec.kind = Kind::Tt;
        spec.tt_rank = std::stoul(text.substr(2));
        if (spec.tt_rank < 1) throw std::invalid_argument("TT-rank must be >= 1");
        return spec;
    }
    const auto dash = text.find("-BT");
    if (dash != std::string::npos) {
        spec.kind = Kind::Bt;
        spec.cp_rank = std::stoul(text.substr(0, dash));
        spec.tucker_rank = std::stoul(text.substr(dash + 3));
        if (spec.cp_rank < 1 || spec.tucker_rank < 1)
            throw std::invalid_argument("BT ranks must be >= 1");
        return spec;
    }
    throw std::invalid_argument("cannot parse architecture '" + text +
                                "' (expected baseline, TTr, or x-BTy)");
}

namespace {
std::vector<Preset> make_presets() {
    std::vector<Preset> all;
    all.push_back({"mnist",
                   {{5, 5, 8, 4}, {5, 5, 5, 4}},
                   {ArchSpec::parse("baseline"), ArchSpec::parse("TT2"),
                    ArchSpec::parse("1-BT2"), ArchSpec::parse("1-BT3")}});
    all.push_back({"cifar10",
                   {{6, 6, 8, 8}, {6, 4, 4, 4}},
                   {ArchSpec::parse("baseline"), ArchSpec::parse("TT2"),
                    ArchSpec::parse("TT8"), ArchSpec::parse("1-BT2"),
                    ArchSpec::parse("4-BT2"), ArchSpec::parse("4-BT3")}});
    all.push_back({"imagenet",
                   {{10, 10, 8, 8}, {8, 8, 8, 8}},
                   {ArchSpec::parse("baseline"), ArchSpec::parse("TT2"),
                    ArchSpec::parse("TT8"), ArchSpec::parse("1-BT2"),
                    ArchSpec::parse("4-BT2")}});
    return all;
}
}  // namespace

const Preset& preset(const std::string& name) {
    static const std::vector<Preset> all = make_presets();
    for (const auto& p : all)
        if (p.name == name) return p;
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"mnist", "cifar10", "imagenet"}; }

}  // namespace btnet
