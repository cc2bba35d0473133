#include "btnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "btnet/io.hpp"

namespace btnet::train {

using nlohmann::json;

// ---- config -----------------------------------------------------------

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    TrainConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "arch") cfg.arch = value.get<std::string>();
            else if (key == "cp_rank") cfg.cp_rank = value.get<std::size_t>();
            else if (key == "tucker_rank") cfg.tucker_rank = value.get<std::size_t>();
            else if (key == "tt_rank") cfg.tt_rank = value.get<std::size_t>();
            else if (key == "input_dims") cfg.input_dims = value.get<Shape>();
            else if (key == "output_dims") cfg.output_dims = value.get<Shape>();
            else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "momentum") cfg.momentum = value.get<double>();
            else if (key == "lr_decay") cfg.lr_decay = value.get<double>();
            else if (key == "lr_decay_every") cfg.lr_decay_every = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "activation") cfg.activation = value.get<std::string>();
            else if (key == "data_dir") cfg.data_dir = value.get<std::string>();
            else if (key == "metrics_csv") cfg.metrics_csv = value.get<std::string>();
            else if (key == "checkpoint_path") cfg.checkpoint_path = value.get<std::string>();
            else if (key == "threads") cfg.threads = value.get<std::size_t>();
            else if (key == "max_train_samples") cfg.max_train_samples = value.get<std::size_t>();
            else if (key == "max_test_samples") cfg.max_test_samples = value.get<std::size_t>();
            else throw ConfigError("unknown config key: " + key);
        } catch (const json::exception& e) {
            throw ConfigError("bad value for config key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

// ---- network ----------------------------------------------------------

DenseTensor Network::forward(const DenseTensor& x, bool training) {
    DenseTensor t = x;
    for (auto& layer : layers) t = layer->forward(t, training);
    return t;
}

double Network::forward_loss(const DenseTensor& x, const std::vector<int>& labels,
                             bool training) {
    return loss.forward(forward(x, training), labels);
}

void Network::backward() {
    DenseTensor g = loss.backward();
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
}

std::vector<nn::ParamRef> Network::parameters() {
    std::vector<nn::ParamRef> all;
    for (auto& layer : layers)
        for (auto& p : layer->parameters()) all.push_back(p);
    return all;
}

void Network::zero_grads() {
    for (auto& layer : layers) layer->zero_grads();
}

namespace {
bool is_weight_param(const std::string& name) {
    const auto dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    return leaf != "bias" && leaf != "scale" && leaf != "shift";
}
}  // namespace

std::size_t Network::weight_param_count() {
    std::size_t n = 0;
    for (auto& p : parameters())
        if (is_weight_param(p.name)) n += p.value->size();
    return n;
}

std::size_t Network::param_count() {
    std::size_t n = 0;
    for (auto& p : parameters()) n += p.value->size();
    return n;
}

std::uint64_t Network::param_checksum() {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (auto& p : parameters()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
        for (std::size_t i = 0; i < p.value->size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

void Network::save(const std::string& path) {
    json manifest;
    manifest["format"] = "btnet-checkpoint-v1";
    manifest["params"] = json::array();
    for (auto& p : parameters()) {
        json entry;
        entry["name"] = p.name;
        entry["shape"] = p.value->shape();
        manifest["params"].push_back(entry);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    const std::string text = manifest.dump();
    write_u32(f, static_cast<std::uint32_t>(text.size()));
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (auto& p : parameters()) write_tensor(f, *p.value);
}

void Network::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    const std::uint32_t len = read_u32(f);
    std::string text(len, '\0');
    f.read(text.data(), len);
    if (!f) throw std::runtime_error("truncated checkpoint manifest in " + path);
    json manifest = json::parse(text);
    auto params = parameters();
    const auto& entries = manifest.at("params");
    if (entries.size() != params.size())
        throw std::runtime_error("checkpoint parameter list does not match network");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (entries[i].at("name").get<std::string>() != params[i].name)
            throw std::runtime_error("checkpoint parameter order mismatch at " +
                                     params[i].name);
        DenseTensor t = read_tensor(f);
        if (!t.same_shape(*params[i].value))
            throw std::runtime_error("checkpoint shape mismatch for " + params[i].name);
        *params[i].value = std::move(t);
    }
}

// ---- network assembly -------------------------------------------------

namespace {
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-layer seed, so layers shared between architectures initialize
/// identically under the same global seed.
std::uint64_t layer_seed(std::uint64_t global, const std::string& name) {
    return splitmix64(global ^ fnv1a(name));
}

std::unique_ptr<nn::Layer> make_activation(const std::string& kind, std::string name) {
    if (kind == "tanh") return std::make_unique<nn::TanhLayer>(std::move(name));
    if (kind == "relu") return std::make_unique<nn::ReluLayer>(std::move(name));
    throw ConfigError("unknown activation: " + kind);
}
}  // namespace

Network build_network(const TrainConfig& cfg) {
    constexpr std::size_t kConvOut = 800;   // 50 maps of 4x4 after two pools
    constexpr std::size_t kHidden = 500;
    constexpr std::size_t kClasses = 10;

    if (cfg.arch != "fc_baseline" && cfg.arch != "bt" && cfg.arch != "tt")
        throw ConfigError("unknown arch: " + cfg.arch);
    if (cfg.arch != "fc_baseline") {
        LayerGeometry geom = cfg.geometry();
        try {
            geom.validate();
        } catch (const ShapeError& e) {
            throw ConfigError(e.what());
        }
        if (geom.input_size() != kConvOut)
            throw ConfigError("input_dims must multiply to " + std::to_string(kConvOut) +
                              ", got " + std::to_string(geom.input_size()));
        if (geom.output_size() != kHidden)
            throw ConfigError("output_dims must multiply to " + std::to_string(kHidden) +
                              ", got " + std::to_string(geom.output_size()));
    }

    Network net;
    const auto seed = [&](const std::string& name) { return layer_seed(cfg.seed, name); };
    net.layers.push_back(std::make_unique<nn::Conv2dLayer>("conv1", 1, 20, 5, 5, seed("conv1")));
    net.layers.push_back(make_activation(cfg.activation, "conv1_act"));
    net.layers.push_back(std::make_unique<nn::MaxPool2dLayer>("pool1"));
    net.layers.push_back(std::make_unique<nn::Conv2dLayer>("conv2", 20, 50, 5, 5, seed("conv2")));
    net.layers.push_back(make_activation(cfg.activation, "conv2_act"));
    net.layers.push_back(std::make_unique<nn::MaxPool2dLayer>("pool2"));
    net.layers.push_back(std::make_unique<nn::FlattenLayer>("flatten"));

    if (cfg.arch == "fc_baseline") {
        net.layers.push_back(
            std::make_unique<nn::FcLayer>("fc1", kConvOut, kHidden, seed("fc1")));
    } else if (cfg.arch == "bt") {
        net.layers.push_back(std::make_unique<nn::BtLayer>(
            "bt1", cfg.geometry(), cfg.cp_rank, cfg.tucker_rank, seed("bt1")));
        net.layers.push_back(std::make_unique<nn::BatchNormLayer>("bn1", kHidden));
    } else {
        net.layers.push_back(std::make_unique<nn::TtLayer>("tt1", cfg.geometry(),
                                                           cfg.tt_rank, seed("tt1")));
        net.layers.push_back(std::make_unique<nn::BatchNormLayer>("bn1", kHidden));
    }
    net.layers.push_back(make_activation(cfg.activation, "fc1_act"));
    net.layers.push_back(
        std::make_unique<nn::FcLayer>("fc2", kHidden, kClasses, seed("fc2")));
    return net;
}

// ---- optimization -----------------------------------------------------

void sgd_momentum_step(std::vector<nn::ParamRef>& params,
                       std::vector<DenseTensor>& velocity, double lr, double mu) {
    if (velocity.empty()) {
        velocity.reserve(params.size());
        for (auto& p : params) velocity.emplace_back(p.value->shape());
    }
    if (velocity.size() != params.size())
        throw std::invalid_argument("velocity buffers do not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        DenseTensor& v = velocity[i];
        DenseTensor& p = *params[i].value;
        const DenseTensor& g = *params[i].grad;
        if (!v.same_shape(p) || !g.same_shape(p))
            throw ShapeError("sgd step shape mismatch for " + params[i].name);
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = mu * v[j] - lr * g[j];
            p[j] += v[j];
        }
    }
}

// ---- training loop ----------------------------------------------------

namespace {
DenseTensor gather_batch(const mnist::Dataset& ds, const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end, std::vector<int>& labels) {
    const Shape& s = ds.images.shape();
    const std::size_t sample = s[1] * s[2] * s[3];
    DenseTensor batch({end - begin, s[1], s[2], s[3]});
    labels.clear();
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        std::copy_n(ds.images.data() + src * sample, sample,
                    batch.data() + (i - begin) * sample);
        labels.push_back(ds.labels[src]);
    }
    return batch;
}
}  // namespace

double evaluate(Network& net, const mnist::Dataset& test, std::size_t batch_size,
                std::size_t limit) {
    const std::size_t count =
        limit == 0 ? test.count() : std::min(limit, test.count());
    const Shape& s = test.images.shape();
    const std::size_t sample = s[1] * s[2] * s[3];
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < count; begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, count);
        DenseTensor batch({end - begin, s[1], s[2], s[3]});
        std::copy_n(test.images.data() + begin * sample, (end - begin) * sample,
                    batch.data());
        DenseTensor logits = net.forward(batch, /*training=*/false);
        const std::size_t k = logits.dim(1);
        for (std::size_t i = 0; i < end - begin; ++i) {
            const double* row = logits.data() + i * k;
            const std::size_t pred =
                static_cast<std::size_t>(std::max_element(row, row + k) - row);
            if (static_cast<int>(pred) == test.labels[begin + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(count);
}

TrainResult train(const TrainConfig& cfg, const mnist::Dataset& train_set,
                  const mnist::Dataset& test_set, std::ostream* log) {
    if (cfg.threads > 0) set_max_threads(static_cast<unsigned>(cfg.threads));
    Network net = build_network(cfg);
    auto params = net.parameters();
    std::vector<DenseTensor> velocity;

    const std::size_t count = cfg.max_train_samples == 0
                                  ? train_set.count()
                                  : std::min(cfg.max_train_samples, train_set.count());
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(splitmix64(cfg.seed ^ 0x9e3779b97f4a7c15ULL));

    TrainResult result;
    std::ofstream csv;
    if (!cfg.metrics_csv.empty()) {
        csv.open(cfg.metrics_csv);
        if (!csv) throw std::runtime_error("cannot open " + cfg.metrics_csv);
        csv << "epoch,train_loss,test_acc,seconds\n";
    }

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = cfg.learning_rate *
                          std::pow(cfg.lr_decay,
                                   cfg.lr_decay_every == 0
                                       ? 0.0
                                       : static_cast<double>(epoch / cfg.lr_decay_every));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        std::vector<int> labels;
        for (std::size_t begin = 0; begin < count; begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, count);
            DenseTensor batch = gather_batch(train_set, order, begin, end, labels);
            net.zero_grads();
            const double loss = net.forward_loss(batch, labels, /*training=*/true);
            if (!std::isfinite(loss)) throw DivergenceError(lr, epoch, batches);
            net.backward();
            sgd_momentum_step(params, velocity, lr, cfg.momentum);
            loss_sum += loss;
            ++batches;
        }

        const double test_acc =
            evaluate(net, test_set, cfg.batch_size, cfg.max_test_samples);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochMetrics em{epoch + 1, loss_sum / static_cast<double>(batches), test_acc,
                        seconds};
        result.epochs.push_back(em);
        if (csv.is_open())
            csv << em.epoch << "," << em.train_loss << "," << em.test_accuracy << ","
                << em.seconds << "\n";
        if (log)
            *log << "epoch " << em.epoch << "  lr " << lr << "  loss " << em.train_loss
                 << "  test_acc " << em.test_accuracy << "  (" << em.seconds << "s)\n";
        if (test_acc >= result.best_test_accuracy) {
            result.best_test_accuracy = test_acc;
            if (!cfg.checkpoint_path.empty()) net.save(cfg.checkpoint_path);
        }
    }
    result.final_checksum = net.param_checksum();
    return result;
}

}  // namespace btnet::train
