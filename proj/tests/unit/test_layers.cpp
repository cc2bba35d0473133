#include <cmath>
#include <random>

#include "btnet/costs.hpp"
#include "btnet/layers.hpp"
#include "btnet/tensor.hpp"
#include "doctest.h"

using namespace btnet;

namespace {

DenseTensor randn(Shape shape, std::uint64_t seed) {
    DenseTensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : t.buffer()) v = gauss(rng);
    return t;
}

double max_rel_err(const DenseTensor& got, const DenseTensor& want) {
    REQUIRE(got.size() == want.size());
    double scale = 0.0;
    for (double v : want.buffer()) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) scale = 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    return worst;
}

/// Plain-loop dense reference: y[b][j] = sum_i x[b][i] W[j][i] + bias[j].
DenseTensor dense_forward(const DenseTensor& x, const DenseTensor& w,
                          const DenseTensor& bias) {
    const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
    DenseTensor y({batch, out});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < out; ++j) {
            double acc = bias[j];
            for (std::size_t i = 0; i < in; ++i)
                acc += x[b * in + i] * w[j * in + i];
            y[b * out + j] = acc;
        }
    return y;
}

/// Central finite differences of sum(forward(x) .* r) against the
/// analytic gradients for every parameter entry and the input.
double fd_check(nn::Layer& layer, DenseTensor x, std::uint64_t seed) {
    constexpr double kStep = 1e-5;
    DenseTensor probe = randn(layer.forward(x, true).shape(), seed);

    layer.zero_grads();
    layer.forward(x, true);
    DenseTensor gx = layer.backward(probe);

    const auto objective = [&] {
        DenseTensor y = layer.forward(x, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * probe[i];
        return acc;
    };
    double worst = 0.0;
    const auto entry = [&](double* slot, double analytic) {
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
            entry(&(*p.value)[i], (*p.grad)[i]);
    for (std::size_t i = 0; i < x.size(); ++i) entry(&x[i], gx[i]);
    return worst;
}

/// Kronecker product oracle: (A kron B)[(a_r b_r),(a_c b_c)].
DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
    const std::size_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
    DenseTensor out({ar * br, ac * bc});
    for (std::size_t i = 0; i < ar; ++i)
        for (std::size_t j = 0; j < ac; ++j)
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l)
                    out[(i * br + k) * ac * bc + j * bc + l] =
                        a[i * ac + j] * b[k * bc + l];
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("layers");

TEST_CASE("fc: identity weight passes the input through") {
    nn::FcLayer fc("fc", 3, 3, 1);
    for (std::size_t i = 0; i < 9; ++i) fc.weight[i] = (i % 4 == 0) ? 1.0 : 0.0;
    for (double& v : fc.bias.buffer()) v = 0.0;
    DenseTensor x = randn({2, 3}, 2);
    CHECK(fc.forward(x, false).buffer() == x.buffer());
}

TEST_CASE("fc: hand-computed instance") {
    nn::FcLayer fc("fc", 2, 2, 1);
    fc.weight = DenseTensor({2, 2}, {1, 1, 1, -1});
    fc.bias = DenseTensor({2}, {0, 1});
    DenseTensor y = fc.forward(DenseTensor({1, 2}, {1, 2}), false);
    CHECK(y.buffer() == std::vector<double>{3, 0});
}

TEST_CASE("fc: random case against the loop oracle") {
    nn::FcLayer fc("fc", 7, 5, 3);
    DenseTensor x = randn({4, 7}, 4);
    CHECK(max_rel_err(fc.forward(x, false), dense_forward(x, fc.weight, fc.bias)) <=
          1e-12);
}

TEST_CASE("bt: R_C=R_T=1 acts as a Kronecker product of the factor slices") {
    const LayerGeometry geom{{2, 2}, {2, 2}};
    nn::BtLayer bt("bt", geom, 1, 1, 5);
    for (double& v : bt.bias.buffer()) v = 0.0;
    bt.weight.core[0] = 1.0;

    // Factor k as a J_k x I_k matrix B_k[j][i]; W = B_1 kron B_2.
    DenseTensor b1({2, 2}), b2({2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            b1[j * 2 + i] = bt.weight.factors[0][i * 2 + j];
            b2[j * 2 + i] = bt.weight.factors[1][i * 2 + j];
        }
    DenseTensor w = kron(b1, b2);
    DenseTensor x = randn({3, 4}, 6);
    DenseTensor zero_bias({4});
    CHECK(max_rel_err(bt.forward(x, false), dense_forward(x, w, zero_bias)) <= 1e-10);
}

TEST_CASE("bt: zero core outputs the broadcast bias") {
    nn::BtLayer bt("bt", {{2, 3}, {3, 2}}, 2, 2, 7);
    for (double& v : bt.weight.core.buffer()) v = 0.0;
    DenseTensor x = randn({2, 6}, 8);
    DenseTensor y = bt.forward(x, false);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t j = 0; j < 6; ++j) CHECK(y[b * 6 + j] == bt.bias[j]);
}

TEST_CASE("bt: forward equals dense forward with the reconstructed matrix") {
    const LayerGeometry geom{{5, 5, 8, 4}, {5, 5, 5, 4}};
    nn::BtLayer bt("bt", geom, 1, 2, 9);
    DenseTensor x = randn({3, 800}, 10);
    DenseTensor w = bt.weight.as_matrix();
    DenseTensor bias = bt.bias.reshape({500});
    CHECK(max_rel_err(bt.forward(x, false), dense_forward(x, w, bias)) <= 1e-10);
}

TEST_CASE("bt: zero upstream gradient produces zero gradients") {
    nn::BtLayer bt("bt", {{2, 3}, {3, 2}}, 2, 2, 11);
    DenseTensor x = randn({2, 6}, 12);
    bt.zero_grads();
    bt.forward(x, true);
    DenseTensor gx = bt.backward(DenseTensor({2, 6}));
    for (double v : gx.buffer()) CHECK(v == 0.0);
    for (auto& p : bt.parameters())
        for (double v : p.grad->buffer()) CHECK(v == 0.0);
}

TEST_CASE("bt: finite-difference gradients") {
    nn::BtLayer bt("bt", {{2, 3, 2}, {3, 2, 2}}, 2, 2, 13);
    CHECK(fd_check(bt, randn({2, 12}, 14), 15) <= 1e-4);
}

TEST_CASE("bt: backward is linear in the upstream gradient") {
    nn::BtLayer bt("bt", {{2, 3}, {3, 2}}, 2, 2, 16);
    DenseTensor x = randn({2, 6}, 17);
    DenseTensor g = randn({2, 6}, 18);
    bt.zero_grads();
    bt.forward(x, true);
    DenseTensor gx1 = bt.backward(g);
    DenseTensor g2 = g;
    for (double& v : g2.buffer()) v *= 2.0;
    bt.zero_grads();
    bt.forward(x, true);
    DenseTensor gx2 = bt.backward(g2);
    for (std::size_t i = 0; i < gx1.size(); ++i) CHECK(gx2[i] == 2.0 * gx1[i]);
}

TEST_CASE("tt: rank-1 acts as a Kronecker product of the core slices") {
    const LayerGeometry geom{{2, 2}, {2, 2}};
    nn::TtLayer tt("tt", geom, 1, 19);
    for (double& v : tt.bias.buffer()) v = 0.0;
    DenseTensor b1({2, 2}), b2({2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            b1[j * 2 + i] = tt.weight.cores[0][i * 2 + j];
            b2[j * 2 + i] = tt.weight.cores[1][i * 2 + j];
        }
    DenseTensor w = kron(b1, b2);
    DenseTensor x = randn({3, 4}, 20);
    DenseTensor zero_bias({4});
    CHECK(max_rel_err(tt.forward(x, false), dense_forward(x, w, zero_bias)) <= 1e-10);
}

TEST_CASE("tt: forward equals dense forward with the reconstructed matrix") {
    const LayerGeometry geom{{5, 5, 8, 4}, {5, 5, 5, 4}};
    nn::TtLayer tt("tt", geom, 2, 21);
    DenseTensor x = randn({3, 800}, 22);
    CHECK(max_rel_err(tt.forward(x, false),
                      dense_forward(x, tt.weight.as_matrix(), tt.bias.reshape({500}))) <=
          1e-10);
}

TEST_CASE("tt: finite-difference gradients") {
    nn::TtLayer tt("tt", {{2, 3, 2}, {3, 2, 2}}, 2, 23);
    CHECK(fd_check(tt, randn({2, 12}, 24), 25) <= 1e-4);
}

TEST_CASE("conv2d: 1x1 identity kernel is the identity map") {
    nn::Conv2dLayer conv("conv", 2, 2, 1, 1, 26);
    for (std::size_t i = 0; i < conv.weight.size(); ++i)
        conv.weight[i] = (i % 3 == 0) ? 1.0 : 0.0;  // (F,C,1,1), F=C=2 diag
    for (double& v : conv.bias.buffer()) v = 0.0;
    DenseTensor x = randn({2, 2, 3, 3}, 27);
    CHECK(conv.forward(x, false).buffer() == x.buffer());
}

TEST_CASE("conv2d: finite-difference gradients") {
    nn::Conv2dLayer conv("conv", 2, 3, 3, 3, 28);
    CHECK(fd_check(conv, randn({2, 2, 5, 5}, 29), 30) <= 1e-4);
}

TEST_CASE("maxpool: constant input stays constant, ties go to scan order") {
    nn::MaxPool2dLayer pool("pool");
    DenseTensor x({1, 1, 4, 4});
    for (double& v : x.buffer()) v = 2.5;
    DenseTensor y = pool.forward(x, true);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    for (double v : y.buffer()) CHECK(v == 2.5);
    // Gradient of a tie flows to the first element in scan order.
    DenseTensor g({1, 1, 2, 2});
    for (double& v : g.buffer()) v = 1.0;
    DenseTensor gx = pool.backward(g);
    CHECK(gx[0] == 1.0);
    CHECK(gx[1] == 0.0);
}

TEST_CASE("maxpool: finite-difference gradients") {
    nn::MaxPool2dLayer pool("pool");
    CHECK(fd_check(pool, randn({2, 2, 4, 4}, 31), 32) <= 1e-4);
}

TEST_CASE("tanh and relu: finite-difference gradients") {
    nn::TanhLayer t("tanh");
    CHECK(fd_check(t, randn({2, 6}, 33), 34) <= 1e-4);
    nn::ReluLayer r("relu");
    CHECK(fd_check(r, randn({2, 6}, 35), 36) <= 1e-4);
}

TEST_CASE("batchnorm: training-mode output matches scale and shift") {
    nn::BatchNormLayer bn("bn", 5);
    for (std::size_t f = 0; f < 5; ++f) {
        bn.scale[f] = 1.5 + 0.1 * double(f);
        bn.shift[f] = -0.5 + 0.2 * double(f);
    }
    DenseTensor x = randn({64, 5}, 37);
    DenseTensor y = bn.forward(x, true);
    for (std::size_t f = 0; f < 5; ++f) {
        double mean = 0.0;
        for (std::size_t b = 0; b < 64; ++b) mean += y[b * 5 + f];
        mean /= 64.0;
        double var = 0.0;
        for (std::size_t b = 0; b < 64; ++b) {
            const double d = y[b * 5 + f] - mean;
            var += d * d;
        }
        var /= 64.0;
        CHECK(std::abs(mean - bn.shift[f]) <= 1e-6);
        // eps slightly shrinks the std; 1e-5 slack absorbs it.
        CHECK(std::abs(std::sqrt(var) - bn.scale[f]) <= 1e-4);
    }
}

TEST_CASE("batchnorm: finite-difference gradients") {
    nn::BatchNormLayer bn("bn", 4);
    CHECK(fd_check(bn, randn({6, 4}, 38), 39) <= 1e-4);
}

TEST_CASE("softmax cross-entropy: uniform logits give log K, gradients check out") {
    nn::SoftmaxXent loss;
    DenseTensor logits({2, 4});
    const std::vector<int> labels{1, 3};
    CHECK(std::abs(loss.forward(logits, labels) - std::log(4.0)) <= 1e-12);

    DenseTensor z = randn({3, 5}, 40);
    const std::vector<int> lab{0, 2, 4};
    loss.forward(z, lab);
    DenseTensor g = loss.backward();
    constexpr double kStep = 1e-6;
    for (std::size_t i = 0; i < z.size(); ++i) {
        DenseTensor up = z, down = z;
        up[i] += kStep;
        down[i] -= kStep;
        const double numeric =
            (loss.forward(up, lab) - loss.forward(down, lab)) / (2.0 * kStep);
        CHECK(std::abs(numeric - g[i]) <= 1e-6);
    }
}

TEST_CASE("batch consistency: batched forward equals stacked single samples") {
    const LayerGeometry geom{{2, 3}, {3, 2}};
    nn::FcLayer fc("fc", 6, 6, 41);
    nn::BtLayer bt("bt", geom, 2, 2, 42);
    nn::TtLayer tt("tt", geom, 2, 43);
    DenseTensor x = randn({4, 6}, 44);
    for (nn::Layer* layer : {(nn::Layer*)&fc, (nn::Layer*)&bt, (nn::Layer*)&tt}) {
        DenseTensor batched = layer->forward(x, false);
        for (std::size_t b = 0; b < 4; ++b) {
            DenseTensor row({1, 6});
            for (std::size_t i = 0; i < 6; ++i) row[i] = x[b * 6 + i];
            DenseTensor single = layer->forward(row, false);
            for (std::size_t j = 0; j < 6; ++j)
                CHECK(single[j] == batched[b * 6 + j]);
        }
    }
}

TEST_CASE("instrumented multiply count matches the closed-form schedule cost") {
    const LayerGeometry geom{{5, 5, 8, 4}, {5, 5, 5, 4}};
    nn::BtLayer bt("bt", geom, 1, 2, 45);
    DenseTensor x1 = randn({1, 800}, 46);
    flops::reset();
    bt.forward(x1, false);
    CHECK(flops::multiplies() == costs::bt_forward_flops(geom, 1, 2));

    // Batch B scales every contraction row count by B.
    DenseTensor x3 = randn({3, 800}, 47);
    flops::reset();
    bt.forward(x3, false);
    CHECK(flops::multiplies() == 3 * costs::bt_forward_flops(geom, 1, 2));

    nn::TtLayer tt("tt", geom, 2, 48);
    flops::reset();
    tt.forward(x1, false);
    CHECK(flops::multiplies() == costs::tt_forward_flops(geom, 2));
}

TEST_CASE("backward before forward is a state error") {
    nn::BtLayer bt("bt", {{2, 2}, {2, 2}}, 1, 1, 49);
    CHECK_THROWS_AS(bt.backward(DenseTensor({1, 4})), std::logic_error);
}

TEST_SUITE_END();
