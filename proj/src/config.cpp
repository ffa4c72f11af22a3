#include "graynet/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace graynet::config {

namespace {

using nlohmann::json;

nn::Activation parse_activation(const std::string& name) {
    if (name == "tanh") return nn::Activation::Tanh;
    if (name == "relu") return nn::Activation::Relu;
    if (name == "identity") return nn::Activation::Identity;
    fail(Errc::invalid_spec, "unknown activation '" + name + "'");
}

const char* activation_name(nn::Activation a) {
    switch (a) {
        case nn::Activation::Tanh: return "tanh";
        case nn::Activation::Relu: return "relu";
        case nn::Activation::Identity: return "identity";
    }
    return "tanh";
}

io::IndexRange parse_range(const json& j) {
    const auto v = j.get<std::vector<std::size_t>>();
    require(v.size() == 2, Errc::invalid_spec, "ranges are [lo, hi] pairs");
    return {v[0], v[1]};
}

}  // namespace

std::vector<std::size_t> Experiment::values_for(harness::Axis axis) const {
    const auto it = sweep_values.find(harness::axis_name(axis));
    if (it != sweep_values.end()) return it->second;
    switch (axis) {
        case harness::Axis::EmbedDim: return {16, 32, 64};
        case harness::Axis::ExtractDepth: return {3, 5, 7};
        case harness::Axis::SupportSize: return {100, 200, 300};
    }
    return {};
}

Experiment default_experiment() {
    Experiment e;
    e.base.synth = io::SynthSpec{};
    e.base.federation.n_clients = e.base.synth.n_clients;
    e.base.hyper.packet_len = 64;
    e.base.hyper.max_packets = 4;
    e.base.federation.rounds = 4;
    e.base.train.max_epochs = 12;
    return e;
}

Experiment parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("config: ") + e.what());
    }
    Experiment out = default_experiment();
    try {
        if (doc.contains("synth")) {
            const json& j = doc["synth"];
            io::SynthSpec& s = out.base.synth;
            s.n_flows = j.value("n_flows", s.n_flows);
            s.anomaly_fraction = j.value("anomaly_fraction", s.anomaly_fraction);
            s.n_clients = j.value("n_clients", s.n_clients);
            s.skew = j.value("skew", s.skew);
            s.seed = j.value("seed", s.seed);
            if (j.contains("packet_len_range")) s.packet_len_range = parse_range(j["packet_len_range"]);
            if (j.contains("packets_per_flow_range")) {
                s.packets_per_flow_range = parse_range(j["packets_per_flow_range"]);
            }
            s.public_fraction = j.value("public_fraction", s.public_fraction);
            out.base.federation.n_clients = s.n_clients;
        }
        if (doc.contains("federation")) {
            const json& j = doc["federation"];
            fed::FederationConfig& f = out.base.federation;
            f.n_clients = j.value("n_clients", f.n_clients);
            f.n_servers = j.value("n_servers", f.n_servers);
            f.rounds = j.value("rounds", f.rounds);
            f.clients_per_round = j.value("clients_per_round", f.clients_per_round);
            f.selection_seed = j.value("selection_seed", f.selection_seed);
            f.t_g = j.value("t_g", f.t_g);
            f.test_fraction = j.value("test_fraction", f.test_fraction);
            f.val_fraction = j.value("val_fraction", f.val_fraction);
            if (j.contains("aggregation")) {
                require(j["aggregation"].get<std::string>() == "weighted_average",
                        Errc::invalid_spec, "only weighted_average aggregation exists");
            }
        }
        if (doc.contains("train")) {
            const json& j = doc["train"];
            trainer::TrainConfig& t = out.base.train;
            t.learning_rate = j.value("learning_rate", t.learning_rate);
            t.batch_size = j.value("batch_size", t.batch_size);
            t.max_epochs = j.value("max_epochs", t.max_epochs);
            t.patience = j.value("patience", t.patience);
            t.min_delta = j.value("min_delta", t.min_delta);
            t.depth_cap = j.value("depth_cap", t.depth_cap);
            t.seed = j.value("seed", t.seed);
            t.hidden_width = j.value("hidden_width", t.hidden_width);
            t.initial_depth = j.value("initial_depth", t.initial_depth);
            t.max_degree = j.value("max_degree", t.max_degree);
        }
        if (doc.contains("hyper")) {
            const json& j = doc["hyper"];
            pipeline::HyperParams& h = out.base.hyper;
            h.embed_dim = j.value("embed_dim", h.embed_dim);
            h.extract_depth = j.value("extract_depth", h.extract_depth);
            h.support_size = j.value("support_size", h.support_size);
            h.packet_len = j.value("packet_len", h.packet_len);
            h.max_packets = j.value("max_packets", h.max_packets);
        }
        if (doc.contains("error")) {
            const json& j = doc["error"];
            nn::ErrorConfig& e = out.base.error;
            if (j.contains("lambda")) {
                if (j["lambda"].is_array()) {
                    e.lambda = j["lambda"].get<std::vector<double>>();
                } else {
                    e.lambda = {j["lambda"].get<double>()};
                }
            }
            e.support_k = j.value("support_k", e.support_k);
            e.beta_a = j.value("beta_a", e.beta_a);
            e.beta_r = j.value("beta_r", e.beta_r);
            e.beta_g = j.value("beta_g", e.beta_g);
            for (double beta : {e.beta_a, e.beta_r, e.beta_g}) {
                require(beta > 0.0 && beta <= 1.0, Errc::invalid_spec, "betas must be in (0, 1]");
                require(std::ceil(beta * double(e.support_k)) >= 1.0, Errc::invalid_spec,
                        "beta * support_k must round up to at least 1");
            }
            for (double l : e.lambda) {
                require(l >= 0.0, Errc::invalid_spec, "lambda entries must be nonnegative");
            }
        }
        if (doc.contains("activation")) {
            const json& j = doc["activation"];
            out.base.activation.forward =
                parse_activation(j.value("forward", std::string("tanh")));
            out.base.activation.backward =
                parse_activation(j.value("backward", std::string("tanh")));
        }
        if (doc.contains("embedding")) {
            out.base.train_embedding = doc["embedding"].value("trainable", out.base.train_embedding);
        }
        if (doc.contains("sim_time")) {
            const json& j = doc["sim_time"];
            out.base.sim.step_cost_s = j.value("step_cost_s", out.base.sim.step_cost_s);
            out.base.sim.bytes_per_s = j.value("bandwidth_bytes_per_s", out.base.sim.bytes_per_s);
        }
        if (doc.contains("sweep")) {
            const json& j = doc["sweep"];
            out.folds = j.value("folds", out.folds);
            if (j.contains("values")) {
                for (const auto& [key, value] : j["values"].items()) {
                    harness::parse_axis(key);  // validates the name
                    out.sweep_values[key] = value.get<std::vector<std::size_t>>();
                }
            }
        }
        out.base.xi = doc.value("xi", out.base.xi);
        require(out.base.xi >= 0.0 && out.base.xi <= 1.0, Errc::invalid_spec,
                "xi must lie in [0, 1]");
        out.base.parallel = doc.value("parallel", out.base.parallel);
        out.data_dir = doc.value("data_dir", out.data_dir);
        out.graph_path = doc.value("graph", out.graph_path);
        out.init_params = doc.value("init_params", out.init_params);
        if (doc.contains("seed")) override_seed(out, doc["seed"].get<std::uint64_t>());
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("config: ") + e.what());
    }

    require(out.base.federation.n_clients == out.base.synth.n_clients, Errc::invalid_spec,
            "federation.n_clients must match synth.n_clients");
    io::validate(out.base.synth);
    fed::validate(out.base.federation);
    trainer::validate(out.base.train);
    pipeline::validate(out.base.hyper);
    return out;
}

Experiment load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

std::string to_json(const Experiment& e) {
    json doc;
    doc["synth"] = {{"n_flows", e.base.synth.n_flows},
                    {"anomaly_fraction", e.base.synth.anomaly_fraction},
                    {"n_clients", e.base.synth.n_clients},
                    {"skew", e.base.synth.skew},
                    {"seed", e.base.synth.seed},
                    {"packet_len_range",
                     {e.base.synth.packet_len_range.lo, e.base.synth.packet_len_range.hi}},
                    {"packets_per_flow_range",
                     {e.base.synth.packets_per_flow_range.lo, e.base.synth.packets_per_flow_range.hi}},
                    {"public_fraction", e.base.synth.public_fraction}};
    doc["federation"] = {{"n_clients", e.base.federation.n_clients},
                         {"n_servers", e.base.federation.n_servers},
                         {"rounds", e.base.federation.rounds},
                         {"clients_per_round", e.base.federation.clients_per_round},
                         {"selection_seed", e.base.federation.selection_seed},
                         {"aggregation", "weighted_average"},
                         {"t_g", e.base.federation.t_g},
                         {"test_fraction", e.base.federation.test_fraction},
                         {"val_fraction", e.base.federation.val_fraction}};
    doc["train"] = {{"learning_rate", e.base.train.learning_rate},
                    {"batch_size", e.base.train.batch_size},
                    {"max_epochs", e.base.train.max_epochs},
                    {"patience", e.base.train.patience},
                    {"min_delta", e.base.train.min_delta},
                    {"depth_cap", e.base.train.depth_cap},
                    {"seed", e.base.train.seed},
                    {"hidden_width", e.base.train.hidden_width},
                    {"initial_depth", e.base.train.initial_depth}};
    doc["hyper"] = {{"embed_dim", e.base.hyper.embed_dim},
                    {"extract_depth", e.base.hyper.extract_depth},
                    {"support_size", e.base.hyper.support_size},
                    {"packet_len", e.base.hyper.packet_len},
                    {"max_packets", e.base.hyper.max_packets}};
    doc["error"] = {{"lambda", e.base.error.lambda},
                    {"support_k", e.base.error.support_k},
                    {"beta_a", e.base.error.beta_a},
                    {"beta_r", e.base.error.beta_r},
                    {"beta_g", e.base.error.beta_g}};
    doc["activation"] = {{"forward", activation_name(e.base.activation.forward)},
                         {"backward", activation_name(e.base.activation.backward)}};
    doc["embedding"] = {{"trainable", e.base.train_embedding}};
    doc["sim_time"] = {{"step_cost_s", e.base.sim.step_cost_s},
                       {"bandwidth_bytes_per_s", e.base.sim.bytes_per_s}};
    doc["xi"] = e.base.xi;
    doc["parallel"] = e.base.parallel;
    doc["sweep"] = {{"folds", e.folds}, {"values", e.sweep_values}};
    if (!e.data_dir.empty()) doc["data_dir"] = e.data_dir;
    if (!e.graph_path.empty()) doc["graph"] = e.graph_path;
    if (!e.init_params.empty()) doc["init_params"] = e.init_params;
    return doc.dump(2);
}

void override_seed(Experiment& experiment, std::uint64_t seed) {
    experiment.base.synth.seed = seed;
    experiment.base.train.seed = seed;
    experiment.base.federation.selection_seed = seed;
}

RuntimeData prepare_data(const Experiment& experiment) {
    namespace fs = std::filesystem;
    RuntimeData out;
    if (experiment.data_dir.empty()) {
        out.synth = io::synthesize(experiment.base.synth);
        out.graph = out.synth.graph;
    } else {
        const fs::path dir(experiment.data_dir);
        out.synth.d_g = io::read_flows_file((dir / "d_g.jsonl").string());
        out.synth.d_ps.resize(experiment.base.federation.n_clients);
        for (std::size_t c = 0; c < out.synth.d_ps.size(); ++c) {
            const fs::path path = dir / ("d_ps_client" + std::to_string(c) + ".jsonl");
            out.synth.d_ps[c] = io::read_flows_file(path.string());
        }
        out.synth.d_a = io::read_action_samples_file((dir / "d_a.jsonl").string());
        out.synth.d_r = io::read_relation_samples_file((dir / "d_r.jsonl").string());
        out.synth.graph = graph::load_graph((dir / "graph.json").string());
        out.graph = out.synth.graph;
    }
    if (!experiment.graph_path.empty()) {
        out.graph = graph::load_graph(experiment.graph_path);
        out.synth.graph = out.graph;
    }
    return out;
}

}  // namespace graynet::config
