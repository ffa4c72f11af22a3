#include "graynet/graynet.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "graynet/config.hpp"
#include "graynet/data_io.hpp"
#include "graynet/federation.hpp"
#include "graynet/harness.hpp"
#include "graynet/metrics.hpp"

#include <json.hpp>

namespace {

thread_local std::string g_last_error;

gn_status status_for(graynet::Errc code) {
    using graynet::Errc;
    switch (code) {
        case Errc::ok:
            return GN_OK;
        case Errc::invalid_spec:
        case Errc::nonpositive_k:
        case Errc::nonpositive_granularity:
        case Errc::empty_seed_set:
        case Errc::invalid_count:
        case Errc::too_many_servers:
            return GN_E_USAGE;
        case Errc::io_error:
            return GN_E_IO;
        case Errc::parse_error:
        case Errc::bad_magic:
        case Errc::truncated_record:
        case Errc::length_overflow:
            return GN_E_PARSE;
        default:
            return GN_E_DATA;
    }
}

template <class Fn>
gn_status guarded(Fn&& fn) {
    try {
        fn();
        return GN_OK;
    } catch (const graynet::Error& e) {
        g_last_error = e.what();
        return status_for(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GN_E_INTERNAL;
    }
}

std::filesystem::path ensure_dir(const char* out_dir) {
    graynet::require(out_dir != nullptr && *out_dir != '\0', graynet::Errc::invalid_spec,
                     "output directory required");
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    graynet::require(!ec, graynet::Errc::io_error, "cannot create " + dir.string());
    return dir;
}

}  // namespace

struct gn_config {
    graynet::config::Experiment experiment;
};

struct gn_capture {
    graynet::io::CaptureFile capture;
};

extern "C" {

const char* gn_last_error(void) { return g_last_error.c_str(); }

const char* gn_version(void) { return "graynet 1.0.0"; }

gn_status gn_config_load(const char* path, gn_config** out) {
    return guarded([&] {
        graynet::require(path && out, graynet::Errc::invalid_spec, "null argument");
        *out = new gn_config{graynet::config::load(path)};
    });
}

gn_status gn_config_parse(const char* json_text, gn_config** out) {
    return guarded([&] {
        graynet::require(json_text && out, graynet::Errc::invalid_spec, "null argument");
        *out = new gn_config{graynet::config::parse(json_text)};
    });
}

gn_status gn_config_override_seed(gn_config* config, unsigned long long seed) {
    return guarded([&] {
        graynet::require(config != nullptr, graynet::Errc::invalid_spec, "null config");
        graynet::config::override_seed(config->experiment, seed);
    });
}

gn_status gn_config_dump(const gn_config* config, char** out) {
    return guarded([&] {
        graynet::require(config && out, graynet::Errc::invalid_spec, "null argument");
        const std::string text = graynet::config::to_json(config->experiment);
        *out = new char[text.size() + 1];
        std::memcpy(*out, text.c_str(), text.size() + 1);
    });
}

void gn_config_free(gn_config* config) { delete config; }

void gn_string_free(char* text) { delete[] text; }

gn_status gn_generate(const gn_config* config, const char* out_dir) {
    return guarded([&] {
        graynet::require(config != nullptr, graynet::Errc::invalid_spec, "null config");
        const auto dir = ensure_dir(out_dir);
        const graynet::io::SynthData data =
            graynet::io::synthesize(config->experiment.base.synth);
        graynet::io::write_flows_file((dir / "d_g.jsonl").string(), data.d_g);
        for (std::size_t c = 0; c < data.d_ps.size(); ++c) {
            graynet::io::write_flows_file(
                (dir / ("d_ps_client" + std::to_string(c) + ".jsonl")).string(), data.d_ps[c]);
        }
        graynet::io::write_action_samples_file((dir / "d_a.jsonl").string(), data.d_a);
        graynet::io::write_relation_samples_file((dir / "d_r.jsonl").string(), data.d_r);
        graynet::graph::save_graph(data.graph, (dir / "graph.json").string());
    });
}

gn_status gn_train(const gn_config* config, const char* out_dir, double* e_star) {
    return guarded([&] {
        graynet::require(config != nullptr, graynet::Errc::invalid_spec, "null config");
        const auto dir = ensure_dir(out_dir);
        const graynet::config::Experiment& exp = config->experiment;

        const graynet::config::RuntimeData runtime = graynet::config::prepare_data(exp);
        graynet::fed::FederationData data = graynet::fed::split_public_pool(
            runtime.synth.d_g, runtime.synth.d_ps, runtime.synth.d_a, runtime.synth.d_r,
            exp.base.federation, exp.base.train.seed);

        if (!exp.init_params.empty()) {
            // Validates the warm-start file early so a corrupt path fails
            // with its name before any training runs.
            graynet::nn::load_params(exp.init_params);
        }

        graynet::fed::FederationResult result = graynet::fed::run_federation(
            runtime.graph, exp.base.federation, exp.base.train, exp.base.hyper,
            exp.base.activation, exp.base.error, exp.base.train_embedding, data, exp.base.xi,
            exp.base.sim);

        graynet::nn::save_params(result.params, (dir / "params.bin").string());
        graynet::fed::write_round_logs((dir / "rounds.jsonl").string(), result.rounds);
        {
            std::ofstream report((dir / "report.json").string());
            graynet::require(report.good(), graynet::Errc::io_error, "cannot write report.json");
            report << result.server_report.to_json() << "\n";
        }
        if (e_star) *e_star = result.e_star;
    });
}

gn_status gn_sweep(const gn_config* config, const char* axis, const char* out_dir) {
    return guarded([&] {
        graynet::require(config != nullptr, graynet::Errc::invalid_spec, "null config");
        graynet::require(axis != nullptr, graynet::Errc::invalid_spec, "axis required");
        const auto dir = ensure_dir(out_dir);
        const graynet::config::Experiment& exp = config->experiment;

        graynet::harness::SweepSpec spec;
        spec.axis = graynet::harness::parse_axis(axis);
        spec.values = exp.values_for(spec.axis);
        spec.base = exp.base;
        spec.folds = exp.folds;

        const graynet::harness::SweepResult result = graynet::harness::run_sweep(spec);
        const std::string stem = "sweep_" + std::string(graynet::harness::axis_name(spec.axis));
        {
            std::ofstream csv((dir / (stem + ".csv")).string());
            graynet::require(csv.good(), graynet::Errc::io_error, "cannot write sweep csv");
            csv << graynet::harness::emit_table(result, graynet::harness::TableFormat::Csv);
        }
        {
            std::ofstream md((dir / (stem + ".md")).string());
            graynet::require(md.good(), graynet::Errc::io_error, "cannot write sweep markdown");
            md << graynet::harness::emit_table(result, graynet::harness::TableFormat::Markdown);
        }
        for (const graynet::harness::FoldOutcome& fold : result.folds) {
            const std::string name = stem + "_" + std::to_string(fold.value) + "_fold" +
                                     std::to_string(fold.fold) + ".jsonl";
            graynet::fed::write_round_logs((dir / name).string(), fold.rounds);
        }
        {
            // Wall-clock timings live outside the tables so the tables stay
            // reproducible byte for byte.
            std::ofstream report((dir / (stem + "_walltime.txt")).string());
            graynet::require(report.good(), graynet::Errc::io_error, "cannot write wall report");
            for (const graynet::harness::SweepRow& row : result.rows) {
                report << row.value << " " << row.wall_seconds << "\n";
            }
        }
    });
}

gn_status gn_eval_file(const char* predictions_path, double xi, double* g_error) {
    return guarded([&] {
        graynet::require(predictions_path != nullptr, graynet::Errc::invalid_spec, "null path");
        std::ifstream in(predictions_path);
        graynet::require(in.good(), graynet::Errc::io_error,
                         std::string("cannot open ") + predictions_path);
        std::vector<graynet::metrics::Prediction> predictions;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const nlohmann::json doc = nlohmann::json::parse(line);
                predictions.push_back(
                    {doc.at("flow_id").get<std::string>(),
                     graynet::io::parse_label(doc.at("predicted").get<std::string>()),
                     graynet::io::parse_label(doc.at("actual").get<std::string>())});
            } catch (const nlohmann::json::exception& e) {
                graynet::fail(graynet::Errc::parse_error,
                              std::string(predictions_path) + " line " +
                                  std::to_string(line_no) + ": " + e.what());
            }
        }
        const graynet::metrics::ConfusionRates rates =
            graynet::metrics::confusion(predictions, xi);
        if (g_error) *g_error = graynet::metrics::g_error(rates);
    });
}

gn_status gn_capture_open(const char* path, gn_capture** out) {
    return guarded([&] {
        graynet::require(path && out, graynet::Errc::invalid_spec, "null argument");
        *out = new gn_capture{graynet::io::read_capture_file(path)};
    });
}

unsigned long gn_capture_packet_count(const gn_capture* capture) {
    return capture ? static_cast<unsigned long>(capture->capture.packets.size()) : 0;
}

int gn_capture_byte_order(const gn_capture* capture) {
    if (!capture) return 1;
    return capture->capture.byte_order == graynet::io::ByteOrder::Big ? 0 : 1;
}

gn_status gn_capture_packet(const gn_capture* capture, unsigned long index,
                            gn_packet_info* info) {
    return guarded([&] {
        graynet::require(capture && info, graynet::Errc::invalid_spec, "null argument");
        graynet::require(index < capture->capture.packets.size(), graynet::Errc::invalid_spec,
                         "packet index out of range");
        const graynet::io::CapturePacket& packet = capture->capture.packets[index];
        info->timestamp = packet.timestamp();
        info->captured_len = static_cast<unsigned long>(packet.data.size());
        info->original_len = packet.orig_len;
    });
}

void gn_capture_free(gn_capture* capture) { delete capture; }

}  // extern "C"
