#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "btnet/bt_weight.hpp"
#include "btnet/geometry.hpp"
#include "btnet/tensor.hpp"
#include "btnet/tt_weight.hpp"

namespace btnet::nn {

/// Named view of one parameter tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    DenseTensor* value;
    DenseTensor* grad;
};

/// Forward/backward layer contract. Inputs and outputs carry a leading
/// batch mode. backward must follow a forward on the same batch and
/// accumulates into the parameter gradients; call zero_grads between
/// optimizer steps.
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }

    virtual DenseTensor forward(const DenseTensor& x, bool training) = 0;
    virtual DenseTensor backward(const DenseTensor& grad_y) = 0;
    virtual std::vector<ParamRef> parameters() { return {}; }

    void zero_grads();

protected:
    void require_forward_ran(bool have_cache) const;

private:
    std::string name_;
};

/// y = x W^T + b with W of shape (out, in).
class FcLayer : public Layer {
public:
    FcLayer(std::string name, std::size_t in, std::size_t out, std::uint64_t seed);

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;
    std::vector<ParamRef> parameters() override;

    DenseTensor weight, bias;
    DenseTensor weight_grad, bias_grad;

private:
    DenseTensor cached_x_;
    bool have_cache_ = false;
};

/// FC replacement holding its weight in block-term format. The input row
/// is reshaped to (I_1..I_N) and contracted with each block's factors
/// along I_1, ..., I_N in turn, then with the block core over the N
/// Tucker bonds; blocks are summed and the bias added. Never materializes
/// the full matrix.
class BtLayer : public Layer {
public:
    BtLayer(std::string name, LayerGeometry geometry, std::size_t cp_rank,
            std::size_t tucker_rank, std::uint64_t seed);

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;
    std::vector<ParamRef> parameters() override;

    BtWeight weight;
    DenseTensor bias;  // full (J_1, ..., J_N) tensor
    std::vector<DenseTensor> factor_grads;
    DenseTensor core_grad, bias_grad;

private:
    // Per block: the post-step-k intermediates T_1..T_N; T_0 is shared.
    DenseTensor cached_input_;
    std::vector<std::vector<DenseTensor>> cached_steps_;
    std::vector<std::vector<DenseTensor>> cached_factor_slices_;
    std::vector<DenseTensor> cached_core_slices_;
    bool have_cache_ = false;
};

/// FC replacement holding its weight as a tensor train; cores are
/// contracted left to right.
class TtLayer : public Layer {
public:
    TtLayer(std::string name, LayerGeometry geometry, std::size_t rank,
            std::uint64_t seed);

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;
    std::vector<ParamRef> parameters() override;

    TtWeight weight;
    DenseTensor bias;
    std::vector<DenseTensor> core_grads;
    DenseTensor bias_grad;

private:
    DenseTensor cached_input_;
    std::vector<DenseTensor> cached_steps_;
    DenseTensor first_core_view_;  // core 0 with the unit bond squeezed
    bool have_cache_ = false;
};

/// Direct 2-D convolution, stride 1, no padding. x is (B, C, H, W),
/// weight (F, C, KH, KW).
class Conv2dLayer : public Layer {
public:
    Conv2dLayer(std::string name, std::size_t in_ch, std::size_t out_ch,
                std::size_t kh, std::size_t kw, std::uint64_t seed);

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;
    std::vector<ParamRef> parameters() override;

    DenseTensor weight, bias;
    DenseTensor weight_grad, bias_grad;

private:
    DenseTensor cached_x_;
    bool have_cache_ = false;
};

/// 2x2 max pooling with stride 2; ties resolve to the first element in
/// scan order.
class MaxPool2dLayer : public Layer {
public:
    explicit MaxPool2dLayer(std::string name) : Layer(std::move(name)) {}

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;

private:
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
    bool have_cache_ = false;
};

class TanhLayer : public Layer {
public:
    explicit TanhLayer(std::string name) : Layer(std::move(name)) {}
    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;

private:
    DenseTensor cached_y_;
    bool have_cache_ = false;
};

class ReluLayer : public Layer {
public:
    explicit ReluLayer(std::string name) : Layer(std::move(name)) {}
    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;

private:
    std::vector<bool> mask_;
    Shape input_shape_;
    bool have_cache_ = false;
};

/// Collapse everything after the batch mode into one feature mode.
class FlattenLayer : public Layer {
public:
    explicit FlattenLayer(std::string name) : Layer(std::move(name)) {}
    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;

private:
    Shape input_shape_;
};

/// Per-feature batch normalization over (B, F) input with learnable
/// scale/shift and running statistics (momentum 0.9) for inference.
class BatchNormLayer : public Layer {
public:
    BatchNormLayer(std::string name, std::size_t features, double momentum = 0.9,
                   double eps = 1e-5);

    DenseTensor forward(const DenseTensor& x, bool training) override;
    DenseTensor backward(const DenseTensor& grad_y) override;
    std::vector<ParamRef> parameters() override;

    DenseTensor scale, shift;
    DenseTensor scale_grad, shift_grad;
    DenseTensor running_mean, running_var;

private:
    double momentum_, eps_;
    DenseTensor cached_xhat_;
    std::vector<double> inv_std_;
    bool have_cache_ = false;
};

/// Softmax cross-entropy over (B, K) logits with integer class labels;
/// loss is the batch mean.
class SoftmaxXent {
public:
    double forward(const DenseTensor& logits, const std::vector<int>& labels);
    DenseTensor backward() const;

private:
    DenseTensor probs_;
    std::vector<int> labels_;
    bool have_cache_ = false;
};

}  // namespace btnet::nn
