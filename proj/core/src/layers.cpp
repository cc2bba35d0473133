#include "btnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace btnet::nn {

namespace {
void add_into(DenseTensor& dst, const DenseTensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_into_region(DenseTensor& dst, std::size_t offset, const DenseTensor& src) {
    double* d = dst.data() + offset;
    for (std::size_t i = 0; i < src.size(); ++i) d[i] += src[i];
}

void fill_gaussian(DenseTensor& t, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : t.buffer()) v = gauss(rng);
}
}  // namespace

void Layer::zero_grads() {
    for (auto& p : parameters())
        std::fill(p.grad->buffer().begin(), p.grad->buffer().end(), 0.0);
}

void Layer::require_forward_ran(bool have_cache) const {
    if (!have_cache)
        throw std::logic_error("backward called before forward on layer " + name_);
}

// ---- FcLayer ----------------------------------------------------------

FcLayer::FcLayer(std::string name, std::size_t in, std::size_t out, std::uint64_t seed)
    : Layer(std::move(name)),
      weight({out, in}),
      bias({out}),
      weight_grad({out, in}),
      bias_grad({out}) {
    std::mt19937_64 rng(seed);
    fill_gaussian(weight, std::sqrt(1.0 / static_cast<double>(in)), rng);
}

DenseTensor FcLayer::forward(const DenseTensor& x, bool) {
    if (x.order() != 2 || x.dim(1) != weight.dim(1))
        throw ShapeError("fc " + name() + ": input shape " + shape_to_string(x.shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
    const std::size_t b = x.dim(0), out = weight.dim(0);
    DenseTensor y({b, out});
    matmul_nt(x.data(), b, weight.dim(1), weight.data(), out, y.data());
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < out; ++j) y[i * out + j] += bias[j];
    cached_x_ = x;
    have_cache_ = true;
    return y;
}

DenseTensor FcLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    const std::size_t b = cached_x_.dim(0);
    const std::size_t in = weight.dim(1), out = weight.dim(0);
    if (grad_y.order() != 2 || grad_y.dim(0) != b || grad_y.dim(1) != out)
        throw ShapeError("fc " + name() + ": gradient shape mismatch");

    DenseTensor gw({out, in});
    matmul_tn(grad_y.data(), out, b, cached_x_.data(), in, gw.data());
    add_into(weight_grad, gw);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < out; ++j) bias_grad[j] += grad_y[i * out + j];

    DenseTensor gx({b, in});
    matmul(grad_y.data(), b, out, weight.data(), in, gx.data());
    return gx;
}

std::vector<ParamRef> FcLayer::parameters() {
    return {{name() + ".weight", &weight, &weight_grad},
            {name() + ".bias", &bias, &bias_grad}};
}

// ---- BtLayer ----------------------------------------------------------

BtLayer::BtLayer(std::string name, LayerGeometry geometry, std::size_t cp_rank,
                 std::size_t tucker_rank, std::uint64_t seed)
    : Layer(std::move(name)),
      weight(BtWeight::init(std::move(geometry), cp_rank, tucker_rank, seed)),
      bias(weight.geometry.output_dims),
      core_grad(weight.core.shape()),
      bias_grad(weight.geometry.output_dims) {
    for (const auto& f : weight.factors) factor_grads.emplace_back(f.shape());
}

static std::vector<std::pair<std::size_t, std::size_t>> bt_core_pairs(std::size_t n) {
    // T_N has modes (B, J_1, R_1, ..., J_N, R_N); bond R_k sits at 2k.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 1; k <= n; ++k) pairs.push_back({2 * k, k - 1});
    return pairs;
}

DenseTensor BtLayer::forward(const DenseTensor& x, bool) {
    const auto& geom = weight.geometry;
    if (x.order() != 2 || x.dim(1) != geom.input_size())
        throw ShapeError("bt " + name() + ": input shape " + shape_to_string(x.shape()) +
                         " does not match geometry input size " +
                         std::to_string(geom.input_size()));
    const std::size_t b = x.dim(0), n = geom.order();

    Shape xr_shape{b};
    xr_shape.insert(xr_shape.end(), geom.input_dims.begin(), geom.input_dims.end());
    cached_input_ = x.reshape(xr_shape);

    cached_steps_.assign(weight.cp_rank, {});
    cached_factor_slices_.assign(weight.cp_rank, {});
    cached_core_slices_.clear();

    Shape y_shape{b};
    y_shape.insert(y_shape.end(), geom.output_dims.begin(), geom.output_dims.end());
    DenseTensor y(y_shape);
    const auto core_pairs = bt_core_pairs(n);

    for (std::size_t c = 0; c < weight.cp_rank; ++c) {
        auto& steps = cached_steps_[c];
        auto& slices = cached_factor_slices_[c];
        steps.reserve(n);
        const DenseTensor* t = &cached_input_;
        for (std::size_t k = 0; k < n; ++k) {
            slices.push_back(weight.factor_slice(k, c));
            steps.push_back(contract(*t, slices.back(), {{1, 0}}));
            t = &steps.back();
        }
        cached_core_slices_.push_back(weight.core_slice(c));
        add_into(y, contract(*t, cached_core_slices_.back(), core_pairs));
    }

    const std::size_t j = geom.output_size();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t p = 0; p < j; ++p) y[i * j + p] += bias[p];
    have_cache_ = true;
    return y.reshape({b, j});
}

DenseTensor BtLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    const auto& geom = weight.geometry;
    const std::size_t b = cached_input_.dim(0), n = geom.order();
    const std::size_t j = geom.output_size();
    if (grad_y.order() != 2 || grad_y.dim(0) != b || grad_y.dim(1) != j)
        throw ShapeError("bt " + name() + ": gradient shape mismatch");

    Shape gy_shape{b};
    gy_shape.insert(gy_shape.end(), geom.output_dims.begin(), geom.output_dims.end());
    DenseTensor gyr = grad_y.reshape(gy_shape);

    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t p = 0; p < j; ++p) bias_grad[p] += grad_y[i * j + p];

    const auto core_pairs = bt_core_pairs(n);
    const std::size_t core_block = weight.core.size() / weight.cp_rank;
    DenseTensor gx(cached_input_.shape());

    for (std::size_t c = 0; c < weight.cp_rank; ++c) {
        auto [dt, dg] = contract_backward(cached_steps_[c][n - 1],
                                          cached_core_slices_[c], core_pairs, gyr);
        add_into_region(core_grad, c * core_block, dg);
        for (std::size_t k = n; k-- > 0;) {
            const DenseTensor& prev = (k == 0) ? cached_input_ : cached_steps_[c][k - 1];
            auto [dprev, da] =
                contract_backward(prev, cached_factor_slices_[c][k], {{1, 0}}, dt);
            const std::size_t block = factor_grads[k].size() / weight.cp_rank;
            add_into_region(factor_grads[k], c * block, da);
            dt = std::move(dprev);
        }
        add_into(gx, dt);
    }
    return gx.reshape({b, geom.input_size()});
}

std::vector<ParamRef> BtLayer::parameters() {
    std::vector<ParamRef> refs;
    for (std::size_t k = 0; k < weight.factors.size(); ++k)
        refs.push_back({name() + ".factor" + std::to_string(k), &weight.factors[k],
                        &factor_grads[k]});
    refs.push_back({name() + ".core", &weight.core, &core_grad});
    refs.push_back({name() + ".bias", &bias, &bias_grad});
    return refs;
}

// ---- TtLayer ----------------------------------------------------------

TtLayer::TtLayer(std::string name, LayerGeometry geometry, std::size_t rank,
                 std::uint64_t seed)
    : Layer(std::move(name)),
      weight(TtWeight::init(std::move(geometry), rank, seed)),
      bias(weight.geometry.output_dims),
      bias_grad(weight.geometry.output_dims) {
    for (const auto& c : weight.cores) core_grads.emplace_back(c.shape());
}

DenseTensor TtLayer::forward(const DenseTensor& x, bool) {
    const auto& geom = weight.geometry;
    if (x.order() != 2 || x.dim(1) != geom.input_size())
        throw ShapeError("tt " + name() + ": input shape " + shape_to_string(x.shape()) +
                         " does not match geometry input size " +
                         std::to_string(geom.input_size()));
    const std::size_t b = x.dim(0), n = geom.order();

    Shape xr_shape{b};
    xr_shape.insert(xr_shape.end(), geom.input_dims.begin(), geom.input_dims.end());
    cached_input_ = x.reshape(xr_shape);

    const auto& c0 = weight.cores[0];
    first_core_view_ = c0.reshape(Shape(c0.shape().begin() + 1, c0.shape().end()));

    cached_steps_.clear();
    cached_steps_.reserve(n);
    cached_steps_.push_back(contract(cached_input_, first_core_view_, {{1, 0}}));
    for (std::size_t k = 1; k < n; ++k) {
        const DenseTensor& prev = cached_steps_.back();
        cached_steps_.push_back(
            contract(prev, weight.cores[k], {{1, 1}, {prev.order() - 1, 0}}));
    }

    // T_N is (B, J_1, ..., J_N, 1).
    const std::size_t j = geom.output_size();
    DenseTensor y = cached_steps_.back().reshape({b, j});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t p = 0; p < j; ++p) y[i * j + p] += bias[p];
    have_cache_ = true;
    return y;
}

DenseTensor TtLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    const auto& geom = weight.geometry;
    const std::size_t b = cached_input_.dim(0), n = geom.order();
    const std::size_t j = geom.output_size();
    if (grad_y.order() != 2 || grad_y.dim(0) != b || grad_y.dim(1) != j)
        throw ShapeError("tt " + name() + ": gradient shape mismatch");

    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t p = 0; p < j; ++p) bias_grad[p] += grad_y[i * j + p];

    DenseTensor dt = grad_y.reshape(cached_steps_.back().shape());
    for (std::size_t k = n; k-- > 1;) {
        const DenseTensor& prev = (k == 1) ? cached_steps_[0] : cached_steps_[k - 1];
        auto [dprev, dcore] = contract_backward(
            prev, weight.cores[k], {{1, 1}, {prev.order() - 1, 0}}, dt);
        add_into(core_grads[k], dcore);
        dt = std::move(dprev);
    }
    auto [dx, dc0] = contract_backward(cached_input_, first_core_view_, {{1, 0}}, dt);
    add_into_region(core_grads[0], 0, dc0);  // same buffer, squeezed shape
    return dx.reshape({b, geom.input_size()});
}

std::vector<ParamRef> TtLayer::parameters() {
    std::vector<ParamRef> refs;
    for (std::size_t k = 0; k < weight.cores.size(); ++k)
        refs.push_back({name() + ".core" + std::to_string(k), &weight.cores[k],
                        &core_grads[k]});
    refs.push_back({name() + ".bias", &bias, &bias_grad});
    return refs;
}

// ---- Conv2dLayer ------------------------------------------------------

Conv2dLayer::Conv2dLayer(std::string name, std::size_t in_ch, std::size_t out_ch,
                         std::size_t kh, std::size_t kw, std::uint64_t seed)
    : Layer(std::move(name)),
      weight({out_ch, in_ch, kh, kw}),
      bias({out_ch}),
      weight_grad({out_ch, in_ch, kh, kw}),
      bias_grad({out_ch}) {
    std::mt19937_64 rng(seed);
    fill_gaussian(weight, std::sqrt(1.0 / static_cast<double>(in_ch * kh * kw)), rng);
}

DenseTensor Conv2dLayer::forward(const DenseTensor& x, bool) {
    const std::size_t f = weight.dim(0), c = weight.dim(1);
    const std::size_t kh = weight.dim(2), kw = weight.dim(3);
    if (x.order() != 4 || x.dim(1) != c || x.dim(2) < kh || x.dim(3) < kw)
        throw ShapeError("conv " + name() + ": bad input shape " +
                         shape_to_string(x.shape()));
    const std::size_t b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;

    DenseTensor y({b, f, oh, ow});
    parallel_for(b, [&](std::size_t ni) {
        const double* xn = x.data() + ni * c * h * w;
        double* yn = y.data() + ni * f * oh * ow;
        for (std::size_t fi = 0; fi < f; ++fi) {
            double* yf = yn + fi * oh * ow;
            std::fill(yf, yf + oh * ow, bias[fi]);
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* xc = xn + ci * h * w;
                const double* wf = weight.data() + (fi * c + ci) * kh * kw;
                for (std::size_t ki = 0; ki < kh; ++ki)
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const double wv = wf[ki * kw + kj];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const double* xrow = xc + (oy + ki) * w + kj;
                            double* yrow = yf + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox)
                                yrow[ox] += wv * xrow[ox];
                        }
                    }
            }
        }
    });
    cached_x_ = x;
    have_cache_ = true;
    return y;
}

DenseTensor Conv2dLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    const std::size_t f = weight.dim(0), c = weight.dim(1);
    const std::size_t kh = weight.dim(2), kw = weight.dim(3);
    const std::size_t b = cached_x_.dim(0), h = cached_x_.dim(2), w = cached_x_.dim(3);
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    if (grad_y.shape() != Shape{b, f, oh, ow})
        throw ShapeError("conv " + name() + ": gradient shape mismatch");

    // Filter gradients: disjoint in the filter index, safe to parallelize.
    parallel_for(f, [&](std::size_t fi) {
        for (std::size_t ni = 0; ni < b; ++ni) {
            const double* gyf = grad_y.data() + (ni * f + fi) * oh * ow;
            const double* xn = cached_x_.data() + ni * c * h * w;
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* xc = xn + ci * h * w;
                double* gwf = weight_grad.data() + (fi * c + ci) * kh * kw;
                for (std::size_t ki = 0; ki < kh; ++ki)
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        double acc = 0.0;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const double* xrow = xc + (oy + ki) * w + kj;
                            const double* gyrow = gyf + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox)
                                acc += gyrow[ox] * xrow[ox];
                        }
                        gwf[ki * kw + kj] += acc;
                    }
            }
        }
    });
    for (std::size_t fi = 0; fi < f; ++fi) {
        double acc = 0.0;
        for (std::size_t ni = 0; ni < b; ++ni) {
            const double* gyf = grad_y.data() + (ni * f + fi) * oh * ow;
            for (std::size_t p = 0; p < oh * ow; ++p) acc += gyf[p];
        }
        bias_grad[fi] += acc;
    }

    DenseTensor gx(cached_x_.shape());
    parallel_for(b, [&](std::size_t ni) {
        double* gxn = gx.data() + ni * c * h * w;
        for (std::size_t fi = 0; fi < f; ++fi) {
            const double* gyf = grad_y.data() + (ni * f + fi) * oh * ow;
            for (std::size_t ci = 0; ci < c; ++ci) {
                double* gxc = gxn + ci * h * w;
                const double* wf = weight.data() + (fi * c + ci) * kh * kw;
                for (std::size_t ki = 0; ki < kh; ++ki)
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const double wv = wf[ki * kw + kj];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const double* gyrow = gyf + oy * ow;
                            double* gxrow = gxc + (oy + ki) * w + kj;
                            for (std::size_t ox = 0; ox < ow; ++ox)
                                gxrow[ox] += wv * gyrow[ox];
                        }
                    }
            }
        }
    });
    return gx;
}

std::vector<ParamRef> Conv2dLayer::parameters() {
    return {{name() + ".weight", &weight, &weight_grad},
            {name() + ".bias", &bias, &bias_grad}};
}

// ---- MaxPool2dLayer ---------------------------------------------------

DenseTensor MaxPool2dLayer::forward(const DenseTensor& x, bool) {
    if (x.order() != 4) throw ShapeError("maxpool expects (B, C, H, W) input");
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / 2, ow = w / 2;
    input_shape_ = x.shape();
    DenseTensor y({b, c, oh, ow});
    argmax_.assign(y.size(), 0);
    for (std::size_t nc = 0; nc < b * c; ++nc) {
        const double* xp = x.data() + nc * h * w;
        double* yp = y.data() + nc * oh * ow;
        std::size_t* ap = argmax_.data() + nc * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (2 * oy) * w + 2 * ox;
                double bv = xp[best];
                const std::size_t cand[3] = {(2 * oy) * w + 2 * ox + 1,
                                             (2 * oy + 1) * w + 2 * ox,
                                             (2 * oy + 1) * w + 2 * ox + 1};
                for (std::size_t q : cand)
                    if (xp[q] > bv) {
                        bv = xp[q];
                        best = q;
                    }
                yp[oy * ow + ox] = bv;
                ap[oy * ow + ox] = nc * h * w + best;
            }
    }
    have_cache_ = true;
    return y;
}

DenseTensor MaxPool2dLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    if (grad_y.size() != argmax_.size())
        throw ShapeError("maxpool gradient shape mismatch");
    DenseTensor gx(input_shape_);
    for (std::size_t i = 0; i < grad_y.size(); ++i) gx[argmax_[i]] += grad_y[i];
    return gx;
}

// ---- activations ------------------------------------------------------

DenseTensor TanhLayer::forward(const DenseTensor& x, bool) {
    DenseTensor y = x;
    for (double& v : y.buffer()) v = std::tanh(v);
    cached_y_ = y;
    have_cache_ = true;
    return y;
}

DenseTensor TanhLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    DenseTensor gx = grad_y;
    for (std::size_t i = 0; i < gx.size(); ++i)
        gx[i] *= 1.0 - cached_y_[i] * cached_y_[i];
    return gx;
}

DenseTensor ReluLayer::forward(const DenseTensor& x, bool) {
    DenseTensor y = x;
    mask_.assign(y.size(), false);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0)
            mask_[i] = true;
        else
            y[i] = 0.0;
    }
    input_shape_ = x.shape();
    have_cache_ = true;
    return y;
}

DenseTensor ReluLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    DenseTensor gx = grad_y;
    for (std::size_t i = 0; i < gx.size(); ++i)
        if (!mask_[i]) gx[i] = 0.0;
    return gx;
}

DenseTensor FlattenLayer::forward(const DenseTensor& x, bool) {
    input_shape_ = x.shape();
    return x.reshape({x.dim(0), x.size() / x.dim(0)});
}

DenseTensor FlattenLayer::backward(const DenseTensor& grad_y) {
    if (input_shape_.empty()) throw std::logic_error("flatten backward before forward");
    return grad_y.reshape(input_shape_);
}

// ---- BatchNormLayer ---------------------------------------------------

BatchNormLayer::BatchNormLayer(std::string name, std::size_t features, double momentum,
                               double eps)
    : Layer(std::move(name)),
      scale({features}),
      shift({features}),
      scale_grad({features}),
      shift_grad({features}),
      running_mean({features}),
      running_var({features}),
      momentum_(momentum),
      eps_(eps) {
    std::fill(scale.buffer().begin(), scale.buffer().end(), 1.0);
    std::fill(running_var.buffer().begin(), running_var.buffer().end(), 1.0);
}

DenseTensor BatchNormLayer::forward(const DenseTensor& x, bool training) {
    const std::size_t f = scale.size();
    if (x.order() != 2 || x.dim(1) != f)
        throw ShapeError("batchnorm " + name() + ": expected (B, " + std::to_string(f) +
                         ") input, got " + shape_to_string(x.shape()));
    const std::size_t b = x.dim(0);
    DenseTensor y({b, f});

    if (training) {
        cached_xhat_ = DenseTensor({b, f});
        inv_std_.assign(f, 0.0);
        for (std::size_t j = 0; j < f; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < b; ++i) mean += x[i * f + j];
            mean /= static_cast<double>(b);
            double var = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double d = x[i * f + j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(b);
            const double istd = 1.0 / std::sqrt(var + eps_);
            inv_std_[j] = istd;
            for (std::size_t i = 0; i < b; ++i) {
                const double xh = (x[i * f + j] - mean) * istd;
                cached_xhat_[i * f + j] = xh;
                y[i * f + j] = scale[j] * xh + shift[j];
            }
            running_mean[j] = momentum_ * running_mean[j] + (1.0 - momentum_) * mean;
            running_var[j] = momentum_ * running_var[j] + (1.0 - momentum_) * var;
        }
        have_cache_ = true;
    } else {
        for (std::size_t j = 0; j < f; ++j) {
            const double istd = 1.0 / std::sqrt(running_var[j] + eps_);
            for (std::size_t i = 0; i < b; ++i)
                y[i * f + j] = scale[j] * (x[i * f + j] - running_mean[j]) * istd + shift[j];
        }
    }
    return y;
}

DenseTensor BatchNormLayer::backward(const DenseTensor& grad_y) {
    require_forward_ran(have_cache_);
    const std::size_t f = scale.size();
    const std::size_t b = cached_xhat_.dim(0);
    if (grad_y.order() != 2 || grad_y.dim(0) != b || grad_y.dim(1) != f)
        throw ShapeError("batchnorm " + name() + ": gradient shape mismatch");

    DenseTensor gx({b, f});
    for (std::size_t j = 0; j < f; ++j) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            sum_gy += grad_y[i * f + j];
            sum_gy_xhat += grad_y[i * f + j] * cached_xhat_[i * f + j];
        }
        scale_grad[j] += sum_gy_xhat;
        shift_grad[j] += sum_gy;
        const double inv_b = 1.0 / static_cast<double>(b);
        const double coeff = scale[j] * inv_std_[j];
        for (std::size_t i = 0; i < b; ++i) {
            gx[i * f + j] = coeff * (grad_y[i * f + j] - sum_gy * inv_b -
                                     cached_xhat_[i * f + j] * sum_gy_xhat * inv_b);
        }
    }
    return gx;
}

std::vector<ParamRef> BatchNormLayer::parameters() {
    return {{name() + ".scale", &scale, &scale_grad},
            {name() + ".shift", &shift, &shift_grad}};
}

// ---- SoftmaxXent ------------------------------------------------------

double SoftmaxXent::forward(const DenseTensor& logits, const std::vector<int>& labels) {
    if (logits.order() != 2 || logits.dim(0) != labels.size())
        throw ShapeError("softmax_xent: logits/labels shape mismatch");
    const std::size_t b = logits.dim(0), k = logits.dim(1);
    probs_ = logits;
    labels_ = labels;
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double* row = probs_.data() + i * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < k; ++j) row[j] /= z;
        loss -= std::log(std::max(row[static_cast<std::size_t>(labels[i])], 1e-300));
    }
    have_cache_ = true;
    return loss / static_cast<double>(b);
}

DenseTensor SoftmaxXent::backward() const {
    if (!have_cache_) throw std::logic_error("softmax_xent backward before forward");
    const std::size_t b = probs_.dim(0), k = probs_.dim(1);
    DenseTensor g = probs_;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        g[i * k + static_cast<std::size_t>(labels_[i])] -= 1.0;
        for (std::size_t j = 0; j < k; ++j) g[i * k + j] *= inv_b;
    }
    return g;
}

}  // namespace btnet::nn
