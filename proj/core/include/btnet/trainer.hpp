#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "btnet/geometry.hpp"
#include "btnet/layers.hpp"
#include "btnet/mnist.hpp"

namespace btnet::train {

/// Flat training configuration; mirrors the JSON config schema one-to-one.
struct TrainConfig {
    std::string arch = "fc_baseline";  // fc_baseline | bt | tt
    std::size_t cp_rank = 1;
    std::size_t tucker_rank = 2;
    std::size_t tt_rank = 2;
    Shape input_dims{5, 5, 8, 4};
    Shape output_dims{5, 5, 5, 4};
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double lr_decay = 0.5;
    std::size_t lr_decay_every = 8;
    std::uint64_t seed = 1;
    std::string activation = "tanh";  // tanh | relu
    std::string data_dir = "data/mnist";
    std::string metrics_csv;      // empty: don't write
    std::string checkpoint_path;  // empty: don't write
    std::size_t threads = 1;
    std::size_t max_train_samples = 0;  // 0: all
    std::size_t max_test_samples = 0;

    LayerGeometry geometry() const { return {input_dims, output_dims}; }

    /// Parse from a flat JSON document; unknown keys are rejected.
    static TrainConfig from_json_text(const std::string& text);
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the loss goes non-finite; carries the diagnostic state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double lr, std::size_t epoch, std::size_t batch_index)
        : std::runtime_error("loss became non-finite (lr " + std::to_string(lr) +
                             ", epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ")"),
          lr(lr), epoch(epoch), batch_index(batch_index) {}
    double lr;
    std::size_t epoch, batch_index;
};

/// A layer stack with its classification loss.
struct Network {
    std::vector<std::unique_ptr<nn::Layer>> layers;
    nn::SoftmaxXent loss;

    DenseTensor forward(const DenseTensor& x, bool training);
    /// forward + loss; caches everything needed for backward().
    double forward_loss(const DenseTensor& x, const std::vector<int>& labels,
                        bool training);
    void backward();
    std::vector<nn::ParamRef> parameters();
    void zero_grads();

    /// Weight-only parameter count (biases and batch-norm scale/shift
    /// excluded), the convention used for whole-network compression ratios.
    std::size_t weight_param_count();
    /// Total stored parameters.
    std::size_t param_count();

    /// FNV-1a over all parameter bytes, for bitwise reproducibility checks.
    std::uint64_t param_checksum();

    /// Checkpoint: length-prefixed JSON manifest (parameter names and
    /// shapes) followed by each parameter tensor in the flat format.
    void save(const std::string& path);
    /// Load into a structurally identical network.
    void load(const std::string& path);
};

/// LeNet-5-style stack: two conv/tanh/maxpool stages, then the first FC
/// layer (or its BT/TT replacement followed by batch norm), an
/// activation, and the final 10-way FC layer.
Network build_network(const TrainConfig& cfg);

/// v <- mu v - lr g;  p <- p + v
void sgd_momentum_step(std::vector<nn::ParamRef>& params,
                       std::vector<DenseTensor>& velocity, double lr, double mu);

struct EpochMetrics {
    std::size_t epoch;
    double train_loss;
    double test_accuracy;
    double seconds;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    double best_test_accuracy = 0.0;
    std::uint64_t final_checksum = 0;
};

double evaluate(Network& net, const mnist::Dataset& test, std::size_t batch_size,
                std::size_t limit = 0);

/// Full training run: seeded per-epoch shuffling, SGD with momentum, the
/// configured step-decay schedule, per-epoch test evaluation, optional
/// metrics CSV ("epoch,train_loss,test_acc,seconds") and best checkpoint.
TrainResult train(const TrainConfig& cfg, const mnist::Dataset& train_set,
                  const mnist::Dataset& test_set, std::ostream* log = nullptr);

}  // namespace btnet::train
