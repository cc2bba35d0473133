#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "btnet/costs.hpp"
#include "btnet/layers.hpp"
#include "btnet/presets.hpp"
#include "btnet/tensor.hpp"
#include "btnet/trainer.hpp"
#include "btnet/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;

btnet::Shape parse_dims(const std::string& text) {
    btnet::Shape dims;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const unsigned long v = std::stoul(item);
        if (v == 0) throw std::invalid_argument("dimension must be positive");
        dims.push_back(v);
    }
    if (dims.empty()) throw std::invalid_argument("empty dimension list");
    return dims;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw btnet::train::ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ParamsRow {
    std::string arch;
    std::uint64_t params;
    std::uint64_t comp_r;
    std::uint64_t flops;
};

ParamsRow make_row(const btnet::LayerGeometry& geom, const btnet::ArchSpec& arch) {
    using namespace btnet;
    const std::uint64_t n_orig = costs::fc_param_count(geom);
    ParamsRow row{arch.label(), 0, 0, 0};
    switch (arch.kind) {
        case ArchSpec::Kind::Fc:
            row.params = n_orig;
            row.comp_r = 1;
            row.flops = costs::fc_forward_flops(geom);
            break;
        case ArchSpec::Kind::Bt:
            row.params = costs::bt_param_count(geom, arch.cp_rank, arch.tucker_rank);
            row.comp_r = costs::compression_ratio(n_orig, row.params);
            row.flops = costs::bt_forward_flops(geom, arch.cp_rank, arch.tucker_rank);
            break;
        case ArchSpec::Kind::Tt:
            row.params = costs::tt_param_count(geom, arch.tt_rank);
            row.comp_r = costs::compression_ratio(n_orig, row.params);
            row.flops = costs::tt_forward_flops(geom, arch.tt_rank);
            break;
    }
    return row;
}

void print_params_table(std::ostream& out, const std::string& title,
                        const std::vector<ParamsRow>& rows) {
    out << title << "\n";
    out << std::left << std::setw(12) << "arch" << std::right << std::setw(12)
        << "params" << std::setw(10) << "comp_r" << std::setw(14) << "flops" << "\n";
    for (const auto& r : rows)
        out << std::left << std::setw(12) << r.arch << std::right << std::setw(12)
            << r.params << std::setw(10) << r.comp_r << std::setw(14) << r.flops
            << "\n";
}

std::unique_ptr<btnet::nn::Layer> make_layer(const btnet::LayerGeometry& geom,
                                             const btnet::ArchSpec& arch,
                                             std::uint64_t seed) {
    using namespace btnet;
    switch (arch.kind) {
        case ArchSpec::Kind::Fc:
            return std::make_unique<nn::FcLayer>("fc", geom.input_size(),
                                                 geom.output_size(), seed);
        case ArchSpec::Kind::Bt:
            return std::make_unique<nn::BtLayer>("bt", geom, arch.cp_rank,
                                                 arch.tucker_rank, seed);
        case ArchSpec::Kind::Tt:
            return std::make_unique<nn::TtLayer>("tt", geom, arch.tt_rank, seed);
    }
    throw std::logic_error("unreachable");
}

double median_ms(std::vector<double>& samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

int run_train(const std::string& config_path, const btnet::train::TrainConfig& overrides,
              const std::vector<std::string>& set_keys) {
    using namespace btnet::train;
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::from_json_text(read_file(config_path));

    const auto is_set = [&](const char* key) {
        return std::find(set_keys.begin(), set_keys.end(), key) != set_keys.end();
    };
    if (is_set("arch")) cfg.arch = overrides.arch;
    if (is_set("cp_rank")) cfg.cp_rank = overrides.cp_rank;
    if (is_set("tucker_rank")) cfg.tucker_rank = overrides.tucker_rank;
    if (is_set("tt_rank")) cfg.tt_rank = overrides.tt_rank;
    if (is_set("input_dims")) cfg.input_dims = overrides.input_dims;
    if (is_set("output_dims")) cfg.output_dims = overrides.output_dims;
    if (is_set("epochs")) cfg.epochs = overrides.epochs;
    if (is_set("batch_size")) cfg.batch_size = overrides.batch_size;
    if (is_set("learning_rate")) cfg.learning_rate = overrides.learning_rate;
    if (is_set("momentum")) cfg.momentum = overrides.momentum;
    if (is_set("lr_decay")) cfg.lr_decay = overrides.lr_decay;
    if (is_set("lr_decay_every")) cfg.lr_decay_every = overrides.lr_decay_every;
    if (is_set("seed")) cfg.seed = overrides.seed;
    if (is_set("activation")) cfg.activation = overrides.activation;
    if (is_set("data_dir")) cfg.data_dir = overrides.data_dir;
    if (is_set("metrics_csv")) cfg.metrics_csv = overrides.metrics_csv;
    if (is_set("checkpoint_path")) cfg.checkpoint_path = overrides.checkpoint_path;
    if (is_set("threads")) cfg.threads = overrides.threads;
    if (is_set("max_train_samples")) cfg.max_train_samples = overrides.max_train_samples;
    if (is_set("max_test_samples")) cfg.max_test_samples = overrides.max_test_samples;

    const auto train_set = btnet::mnist::load(cfg.data_dir + "/train-images-idx3-ubyte",
                                              cfg.data_dir + "/train-labels-idx1-ubyte");
    const auto test_set = btnet::mnist::load(cfg.data_dir + "/t10k-images-idx3-ubyte",
                                             cfg.data_dir + "/t10k-labels-idx1-ubyte");
    const TrainResult result = train(cfg, train_set, test_set, &std::cerr);
    std::cout << "best_test_accuracy " << std::setprecision(6)
              << result.best_test_accuracy << "\n";
    std::cout << "final_param_checksum " << std::hex << result.final_checksum
              << std::dec << "\n";
    return kExitOk;
}

int run_params(const std::vector<std::string>& preset_list, const std::string& in_dims,
               const std::string& out_dims, const std::vector<std::string>& arch_list,
               const std::string& csv_path) {
    using namespace btnet;
    struct Section {
        std::string title;
        std::vector<ParamsRow> rows;
    };
    std::vector<Section> sections;

    if (!in_dims.empty() || !out_dims.empty()) {
        if (in_dims.empty() || out_dims.empty())
            throw std::invalid_argument("--input-dims and --output-dims go together");
        LayerGeometry geom{parse_dims(in_dims), parse_dims(out_dims)};
        geom.validate();
        std::vector<ParamsRow> rows;
        for (const auto& a : arch_list) rows.push_back(make_row(geom, ArchSpec::parse(a)));
        std::ostringstream title;
        title << "custom " << geom.input_size() << "x" << geom.output_size();
        sections.push_back({title.str(), std::move(rows)});
    } else {
        std::vector<std::string> names = preset_list;
        if (names.empty()) names = preset_names();
        for (const auto& name : names) {
            const Preset& p = preset(name);
            std::vector<ParamsRow> rows;
            if (arch_list.empty()) {
                for (const auto& a : p.archs) rows.push_back(make_row(p.geometry, a));
            } else {
                for (const auto& a : arch_list)
                    rows.push_back(make_row(p.geometry, ArchSpec::parse(a)));
            }
            std::ostringstream title;
            title << name << " " << p.geometry.input_size() << "x"
                  << p.geometry.output_size();
            sections.push_back({title.str(), std::move(rows)});
        }
    }

    for (const auto& s : sections) {
        print_params_table(std::cout, s.title, s.rows);
        std::cout << "\n";
    }
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw std::invalid_argument("cannot open csv path: " + csv_path);
        csv << "arch,params,comp_r,flops\n";
        for (const auto& s : sections)
            for (const auto& r : s.rows)
                csv << r.arch << "," << r.params << "," << r.comp_r << "," << r.flops
                    << "\n";
    }
    return kExitOk;
}

int run_bench(const std::string& preset_name, const std::vector<std::string>& arch_list,
              const std::vector<std::size_t>& batches, std::size_t repeats,
              std::uint64_t seed) {
    using namespace btnet;
    const Preset& p = preset(preset_name);
    std::vector<ArchSpec> archs;
    if (arch_list.empty()) {
        archs = p.archs;
    } else {
        for (const auto& a : arch_list) archs.push_back(ArchSpec::parse(a));
    }

    std::cout << "arch,batch,fwd_ms,bwd_ms\n";
    for (const auto& arch : archs) {
        // Analytic multiply counts are the hardware-independent companion
        // numbers; wall time below is machine-specific.
        std::uint64_t analytic = 0;
        switch (arch.kind) {
            case ArchSpec::Kind::Fc:
                analytic = costs::fc_forward_flops(p.geometry);
                break;
            case ArchSpec::Kind::Bt:
                analytic =
                    costs::bt_forward_flops(p.geometry, arch.cp_rank, arch.tucker_rank);
                break;
            case ArchSpec::Kind::Tt:
                analytic = costs::tt_forward_flops(p.geometry, arch.tt_rank);
                break;
        }
        std::cerr << "# " << arch.label() << " analytic multiplies/sample " << analytic
                  << "\n";

        auto layer = make_layer(p.geometry, arch, seed);
        for (const std::size_t b : batches) {
            DenseTensor x({b, p.geometry.input_size()});
            std::mt19937_64 rng(seed + b);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (double& v : x.buffer()) v = gauss(rng);
            DenseTensor gy({b, p.geometry.output_size()});
            for (double& v : gy.buffer()) v = gauss(rng);

            std::vector<double> fwd, bwd;
            for (std::size_t rep = 0; rep < repeats; ++rep) {
                const auto t0 = std::chrono::steady_clock::now();
                DenseTensor y = layer->forward(x, true);
                const auto t1 = std::chrono::steady_clock::now();
                layer->zero_grads();
                layer->backward(gy);
                const auto t2 = std::chrono::steady_clock::now();
                fwd.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                bwd.push_back(std::chrono::duration<double, std::milli>(t2 - t0).count());
            }
            std::cout << arch.label() << "," << b << "," << std::setprecision(5)
                      << median_ms(fwd) << "," << median_ms(bwd) << "\n";
        }
    }
    return kExitOk;
}

int run_verify(std::size_t seeds, bool inject_fault) {
    const auto report = btnet::verify::run_all(seeds, inject_fault);
    bool ok = true;
    for (const auto& suite : report.suites) {
        // Under fault injection the oracle suite is REQUIRED to fail.
        const bool expect_fail =
            inject_fault && suite.name == "oracle-equivalence";
        const bool suite_ok = expect_fail ? !suite.ok() : suite.ok();
        ok = ok && suite_ok;
        std::cout << (suite_ok ? "PASS" : "FAIL") << " " << suite.name << ": "
                  << suite.checks << " checks, " << suite.failures << " failures";
        if (expect_fail) std::cout << " (failure expected: fault injected)";
        std::cout << "\n";
        for (const auto& msg : suite.messages) std::cerr << "  " << msg << "\n";
    }
    std::cout << (ok ? "verification passed" : "verification FAILED") << "\n";
    return ok ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-term / tensor-train layer toolkit"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train an MNIST classifier");
    std::string config_path;
    btnet::train::TrainConfig ov;
    std::string ov_input_dims, ov_output_dims;
    train_cmd->add_option("--config", config_path, "JSON config file");
    train_cmd->add_option("--arch", ov.arch, "fc_baseline | bt | tt");
    train_cmd->add_option("--cp_rank", ov.cp_rank);
    train_cmd->add_option("--tucker_rank", ov.tucker_rank);
    train_cmd->add_option("--tt_rank", ov.tt_rank);
    train_cmd->add_option("--input_dims", ov_input_dims, "comma-separated");
    train_cmd->add_option("--output_dims", ov_output_dims, "comma-separated");
    train_cmd->add_option("--epochs", ov.epochs);
    train_cmd->add_option("--batch_size", ov.batch_size);
    train_cmd->add_option("--learning_rate", ov.learning_rate);
    train_cmd->add_option("--momentum", ov.momentum);
    train_cmd->add_option("--lr_decay", ov.lr_decay);
    train_cmd->add_option("--lr_decay_every", ov.lr_decay_every);
    train_cmd->add_option("--seed", ov.seed);
    train_cmd->add_option("--activation", ov.activation, "tanh | relu");
    train_cmd->add_option("--data_dir", ov.data_dir);
    train_cmd->add_option("--metrics_csv", ov.metrics_csv);
    train_cmd->add_option("--checkpoint_path", ov.checkpoint_path);
    train_cmd->add_option("--threads", ov.threads);
    train_cmd->add_option("--max_train_samples", ov.max_train_samples);
    train_cmd->add_option("--max_test_samples", ov.max_test_samples);

    // params
    auto* params_cmd =
        app.add_subcommand("params", "parameter counts and compression ratios");
    std::vector<std::string> preset_list, params_archs;
    std::string in_dims, out_dims, csv_path;
    params_cmd->add_option("--preset", preset_list, "mnist | cifar10 | imagenet");
    params_cmd->add_option("--input-dims", in_dims, "comma-separated I_k");
    params_cmd->add_option("--output-dims", out_dims, "comma-separated J_k");
    params_cmd->add_option("--arch", params_archs, "baseline | TTr | x-BTy");
    params_cmd->add_option("--csv", csv_path, "also write CSV here");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "layer forward/backward timings");
    std::string bench_preset = "imagenet";
    std::vector<std::string> bench_archs;
    std::vector<std::size_t> batches{1};
    std::size_t repeats = 5;
    std::uint64_t bench_seed = 1;
    bench_cmd->add_option("--preset", bench_preset);
    bench_cmd->add_option("--arch", bench_archs);
    bench_cmd->add_option("--batch", batches, "batch sizes");
    bench_cmd->add_option("--repeats", repeats);
    bench_cmd->add_option("--seed", bench_seed);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the property suites");
    std::size_t seeds = 20;
    bool inject_fault = false;
    verify_cmd->add_option("--seeds", seeds);
    verify_cmd->add_flag("--inject-fault", inject_fault,
                         "perturb one core scalar; the oracle suite must catch it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) {
            std::vector<std::string> set_keys;
            for (const auto* opt : train_cmd->get_options())
                if (opt->count() > 0 && opt->get_name().size() > 2)
                    set_keys.push_back(opt->get_name().substr(2));
            if (!ov_input_dims.empty()) ov.input_dims = parse_dims(ov_input_dims);
            if (!ov_output_dims.empty()) ov.output_dims = parse_dims(ov_output_dims);
            return run_train(config_path, ov, set_keys);
        }
        if (*params_cmd)
            return run_params(preset_list, in_dims, out_dims, params_archs, csv_path);
        if (*bench_cmd)
            return run_bench(bench_preset, bench_archs, batches, repeats, bench_seed);
        if (*verify_cmd) return run_verify(seeds, inject_fault);
    } catch (const btnet::train::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVerifyFail;
    }
    return kExitUsage;
}
