// graynet command line: dataset generation, federated training, sweeps,
// prediction scoring and capture inspection. Talks to the core only through
// the C API in graynet/graynet.h.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "graynet/graynet.h"

namespace {

// 0 = success, 1 = usage error, 2 = data error.
int exit_code(gn_status status) {
    if (status == GN_OK) return 0;
    if (status == GN_E_USAGE) return 1;
    return 2;
}

int report(gn_status status) {
    if (status != GN_OK) std::fprintf(stderr, "error: %s\n", gn_last_error());
    return exit_code(status);
}

struct ConfigHandle {
    gn_config* config = nullptr;
    ~ConfigHandle() { gn_config_free(config); }
};

int load_config(const std::string& path, bool seed_set, unsigned long long seed,
                ConfigHandle& handle) {
    gn_status status = gn_config_load(path.c_str(), &handle.config);
    if (status != GN_OK) return report(status);
    if (seed_set) {
        status = gn_config_override_seed(handle.config, seed);
        if (status != GN_OK) return report(status);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graynet: multiparty privacy-learning simulator for anomaly traffic"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, predictions_path, capture_path;
    unsigned long long seed = 0;
    bool seed_set = false;
    double xi = 0.35;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override every seed in the config")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* gen = app.add_subcommand("gen", "synthesize datasets into a directory");
    gen->add_option("--spec", config_path, "experiment or synthesis spec document")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    add_seed(gen);

    CLI::App* train = app.add_subcommand("train", "run one federation and print E*");
    train->add_option("--config", config_path, "experiment config document")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    add_seed(train);

    CLI::App* sweep = app.add_subcommand("sweep", "cross-validated hyperparameter sweep");
    sweep->add_option("--config", config_path, "experiment config document")->required();
    sweep->add_option("--axis", axis, "embed_dim, extract_depth or support_size")->required();
    sweep->add_option("--out", out_dir, "output directory")->required();
    add_seed(sweep);

    CLI::App* eval = app.add_subcommand("eval", "score a prediction stream");
    eval->add_option("--predictions", predictions_path, "prediction records, one per line")
        ->required();
    eval->add_option("--xi", xi, "balance coefficient in [0, 1]");

    CLI::App* inspect =
        app.add_subcommand("inspect-capture", "summarize a packet capture file");
    inspect->add_option("--file", capture_path, "capture file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        ConfigHandle handle;
        if (int rc = load_config(config_path, seed_set, seed, handle)) return rc;
        return report(gn_generate(handle.config, out_dir.c_str()));
    }

    if (train->parsed()) {
        ConfigHandle handle;
        if (int rc = load_config(config_path, seed_set, seed, handle)) return rc;
        double e_star = 0.0;
        const gn_status status = gn_train(handle.config, out_dir.c_str(), &e_star);
        if (status != GN_OK) return report(status);
        std::printf("%.6f\n", e_star);
        return 0;
    }

    if (sweep->parsed()) {
        ConfigHandle handle;
        if (int rc = load_config(config_path, seed_set, seed, handle)) return rc;
        return report(gn_sweep(handle.config, axis.c_str(), out_dir.c_str()));
    }

    if (eval->parsed()) {
        if (xi < 0.0 || xi > 1.0) {
            std::fprintf(stderr, "error: --xi must lie in [0, 1]\n");
            return 1;
        }
        double g_error = 0.0;
        const gn_status status = gn_eval_file(predictions_path.c_str(), xi, &g_error);
        if (status != GN_OK) return report(status);
        std::printf("%.6f\n", g_error);
        return 0;
    }

    if (inspect->parsed()) {
        gn_capture* capture = nullptr;
        const gn_status status = gn_capture_open(capture_path.c_str(), &capture);
        if (status != GN_OK) return report(status);
        const unsigned long count = gn_capture_packet_count(capture);
        std::printf("%lu packet%s (%s endian)\n", count, count == 1 ? "" : "s",
                    gn_capture_byte_order(capture) == 0 ? "big" : "little");
        for (unsigned long i = 0; i < count; ++i) {
            gn_packet_info info;
            if (gn_capture_packet(capture, i, &info) == GN_OK) {
                std::printf("packet %lu: t=%.6f captured=%lu original=%lu\n", i, info.timestamp,
                            info.captured_len, info.original_len);
            }
        }
        gn_capture_free(capture);
        return 0;
    }

    return 1;
}
