#include "btnet/verify.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "btnet/costs.hpp"
#include "btnet/layers.hpp"
#include "btnet/presets.hpp"
#include "btnet/tt_weight.hpp"

namespace btnet::verify {

namespace {
double max_rel_err(const DenseTensor& got, const DenseTensor& want) {
    double scale = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
        scale = std::max(scale, std::abs(want[i]));
    if (scale == 0.0) scale = 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    return worst;
}

DenseTensor random_batch(std::size_t b, std::size_t n, std::uint64_t seed) {
    DenseTensor x({b, n});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : x.buffer()) v = gauss(rng);
    return x;
}

/// y = W x per batch row, plus the flattened bias.
DenseTensor dense_reference(const DenseTensor& x, const DenseTensor& w,
                            const DenseTensor& bias) {
    const std::size_t b = x.dim(0), in = x.dim(1), out = w.dim(0);
    DenseTensor y({b, out});
    matmul_nt(x.data(), b, in, w.data(), out, y.data());
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < out; ++j) y[i * out + j] += bias[j];
    return y;
}

const std::vector<LayerGeometry>& oracle_geometries() {
    static const std::vector<LayerGeometry> geoms = {
        {{4, 5}, {3, 2}},
        {{2, 3, 4}, {3, 2, 2}},
        {{5, 5, 8, 4}, {5, 5, 5, 4}},
        {{6, 6, 8, 8}, {6, 4, 4, 4}},
    };
    return geoms;
}
}  // namespace

SuiteResult oracle_equivalence(std::size_t seeds, BtWeight* fault_target) {
    SuiteResult suite;
    suite.name = "oracle-equivalence";
    constexpr double kTol = 1e-10;
    const auto& geoms = oracle_geometries();

    if (fault_target != nullptr) {
        // Reference matrix first, then the simulated corruption.
        DenseTensor wref = fault_target->as_matrix();
        fault_target->core[0] += 1.0;
        nn::BtLayer layer("faulted", fault_target->geometry, fault_target->cp_rank,
                          fault_target->tucker_rank, 0);
        layer.weight = *fault_target;
        DenseTensor x = random_batch(2, fault_target->geometry.input_size(), 99);
        const double err =
            max_rel_err(layer.forward(x, false), dense_reference(x, wref, layer.bias));
        ++suite.checks;
        if (err > kTol) {
            ++suite.failures;
            std::ostringstream os;
            os << "faulted BT weight diverges from reference (rel err " << err << ")";
            suite.messages.push_back(os.str());
        }
    }

    for (std::size_t s = 0; s < seeds; ++s) {
        const LayerGeometry& geom = geoms[s % geoms.size()];
        const std::size_t rc = 1 + s % 4, rt = 1 + s % 3;
        nn::BtLayer bt("bt", geom, rc, rt, 1000 + s);
        DenseTensor x = random_batch(3, geom.input_size(), 2000 + s);
        const double bt_err = max_rel_err(
            bt.forward(x, false),
            dense_reference(x, bt.weight.as_matrix(),
                            bt.bias.reshape({geom.output_size()})));
        ++suite.checks;
        if (bt_err > kTol) {
            ++suite.failures;
            std::ostringstream os;
            os << "BT forward vs dense matmul: rel err " << bt_err << " (seed " << s
               << ", " << rc << "-BT" << rt << ")";
            suite.messages.push_back(os.str());
        }

        nn::TtLayer tt("tt", geom, 1 + s % 3, 3000 + s);
        const double tt_err = max_rel_err(
            tt.forward(x, false),
            dense_reference(x, tt.weight.as_matrix(),
                            tt.bias.reshape({geom.output_size()})));
        ++suite.checks;
        if (tt_err > kTol) {
            ++suite.failures;
            std::ostringstream os;
            os << "TT forward vs dense matmul: rel err " << tt_err << " (seed " << s << ")";
            suite.messages.push_back(os.str());
        }
    }
    return suite;
}

namespace {
/// Scalar objective sum(forward(x) .* r); returns max relative error over
/// all parameter entries and the input between analytic and central
/// finite-difference gradients.
double fd_layer_check(nn::Layer& layer, DenseTensor x, std::uint64_t seed) {
    constexpr double kStep = 1e-5;
    DenseTensor y = layer.forward(x, true);
    DenseTensor r(y.shape());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : r.buffer()) v = gauss(rng);

    layer.zero_grads();
    layer.forward(x, true);
    DenseTensor gx = layer.backward(r);

    const auto objective = [&]() {
        DenseTensor out = layer.forward(x, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * r[i];
        return acc;
    };

    double worst = 0.0;
    const auto check_entry = [&](double* slot, double analytic) {
        const double keep = *slot;
        *slot = keep + kStep;
        const double up = objective();
        *slot = keep - kStep;
        const double down = objective();
        *slot = keep;
        const double numeric = (up - down) / (2.0 * kStep);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };

    for (auto& p : layer.parameters())
        for (std::size_t i = 0; i < p.value->size(); ++i)
            check_entry(&(*p.value)[i], (*p.grad)[i]);
    for (std::size_t i = 0; i < x.size(); ++i) check_entry(&x[i], gx[i]);
    return worst;
}
}  // namespace

SuiteResult gradient_checks(std::uint64_t seed) {
    SuiteResult suite;
    suite.name = "gradient-checks";
    constexpr double kTol = 1e-4;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto randn = [&](Shape s) {
        DenseTensor t(std::move(s));
        for (double& v : t.buffer()) v = gauss(rng);
        return t;
    };

    const auto run = [&](const std::string& label, nn::Layer& layer, DenseTensor x) {
        const double err = fd_layer_check(layer, std::move(x), seed + suite.checks);
        ++suite.checks;
        if (err > kTol) {
            ++suite.failures;
            std::ostringstream os;
            os << label << ": finite-difference mismatch, rel err " << err;
            suite.messages.push_back(os.str());
        }
    };

    {
        nn::FcLayer fc("fc", 5, 4, seed);
        run("fc", fc, randn({3, 5}));
    }
    {
        nn::BtLayer bt("bt", {{2, 3, 2}, {3, 2, 2}}, 2, 2, seed);
        run("bt", bt, randn({2, 12}));
    }
    {
        nn::TtLayer tt("tt", {{2, 3, 2}, {3, 2, 2}}, 2, seed);
        run("tt", tt, randn({2, 12}));
    }
    {
        nn::Conv2dLayer conv("conv", 2, 3, 3, 3, seed);
        run("conv2d", conv, randn({2, 2, 5, 5}));
    }
    {
        nn::MaxPool2dLayer pool("pool");
        run("maxpool", pool, randn({2, 2, 4, 4}));
    }
    {
        nn::TanhLayer tanh_layer("tanh");
        run("tanh", tanh_layer, randn({2, 6}));
    }
    {
        nn::ReluLayer relu("relu");
        run("relu", relu, randn({2, 6}));
    }
    {
        nn::BatchNormLayer bn("bn", 4);
        run("batchnorm", bn, randn({6, 4}));
    }
    return suite;
}

SuiteResult rank_bounds(std::size_t seeds) {
    SuiteResult suite;
    suite.name = "rank-bounds";
    std::mt19937_64 rng(424242);
    constexpr std::size_t n = 4;
    std::vector<std::size_t> bt_max(n, 0), tt_max(n, 0);

    for (std::size_t s = 0; s < seeds; ++s) {
        LayerGeometry geom;
        for (std::size_t k = 0; k < n; ++k) {
            geom.input_dims.push_back(2 + rng() % 3);
            geom.output_dims.push_back(2 + rng() % 3);
        }
        const std::size_t rc = 1 + rng() % 3, rt = 1 + rng() % 2;
        BtWeight bt = BtWeight::init(geom, rc, rt, rng());
        for (std::size_t k = 1; k < n; ++k) {
            const std::size_t rank = bt.unfolding_rank(k);
            bt_max[k] = std::max(bt_max[k], rank);
            const std::size_t bound =
                rc * static_cast<std::size_t>(
                         std::llround(std::pow(double(rt), double(std::min(k, n - k)))));
            ++suite.checks;
            if (rank > bound) {
                ++suite.failures;
                std::ostringstream os;
                os << "BT rank bound violated: rank " << rank << " > " << bound
                   << " at k=" << k << " (R_C=" << rc << ", R_T=" << rt << ")";
                suite.messages.push_back(os.str());
            }
        }

        const std::size_t r = 1 + rng() % 3;
        TtWeight tt = TtWeight::init(geom, r, rng());
        for (std::size_t k = 1; k < n; ++k) {
            const std::size_t rank = tt.unfolding_rank(k);
            tt_max[k] = std::max(tt_max[k], rank);
            ++suite.checks;
            if (rank > r) {
                ++suite.failures;
                std::ostringstream os;
                os << "TT rank bound violated: rank " << rank << " > r=" << r
                   << " at k=" << k;
                suite.messages.push_back(os.str());
            }
        }
    }

    for (std::size_t k = 1; k < n; ++k) {
        std::ostringstream os;
        os << "info: max observed rank at k=" << k << ": BT " << bt_max[k] << ", TT "
           << tt_max[k];
        suite.messages.push_back(os.str());
    }
    return suite;
}

SuiteResult table_reproduction() {
    SuiteResult suite;
    suite.name = "table-reproduction";
    for (const auto& name : preset_names()) {
        const Preset& p = preset(name);
        const std::uint64_t n_orig = costs::fc_param_count(p.geometry);
        for (const auto& arch : p.archs) {
            std::uint64_t formula = 0, stored = 0;
            switch (arch.kind) {
                case ArchSpec::Kind::Fc:
                    continue;
                case ArchSpec::Kind::Bt:
                    formula = costs::bt_param_count(p.geometry, arch.cp_rank,
                                                    arch.tucker_rank);
                    stored = BtWeight::init(p.geometry, arch.cp_rank, arch.tucker_rank, 1)
                                 .param_count();
                    break;
                case ArchSpec::Kind::Tt:
                    formula = costs::tt_param_count(p.geometry, arch.tt_rank);
                    stored = TtWeight::init(p.geometry, arch.tt_rank, 1).param_count();
                    break;
            }
            ++suite.checks;
            if (formula != stored) {
                ++suite.failures;
                std::ostringstream os;
                os << name << " " << arch.label() << ": closed-form count " << formula
                   << " != stored scalars " << stored;
                suite.messages.push_back(os.str());
            }
            std::ostringstream os;
            os << "info: " << name << " " << arch.label() << " params " << formula
               << " comp.r " << costs::compression_ratio(n_orig, formula);
            suite.messages.push_back(os.str());
        }
    }
    return suite;
}

Report run_all(std::size_t seeds, bool inject_fault) {
    Report report;
    if (inject_fault) {
        BtWeight faulted = BtWeight::init({{2, 2, 2}, {2, 2, 2}}, 2, 2, 5);
        report.suites.push_back(oracle_equivalence(seeds, &faulted));
    } else {
        report.suites.push_back(oracle_equivalence(seeds));
    }
    report.suites.push_back(gradient_checks());
    report.suites.push_back(rank_bounds(seeds >= 50 ? seeds : 50));
    report.suites.push_back(table_reproduction());
    return report;
}

}  // namespace btnet::verify
