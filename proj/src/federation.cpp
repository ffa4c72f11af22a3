#include "graynet/federation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "graynet/det_rng.hpp"

namespace graynet::fed {

namespace {

using nn::NetworkParams;

double mean_error(const NetworkParams& params, const nn::ActivationSpec& act,
                  const nn::ErrorConfig& errcfg, std::span<const nn::Sample> samples) {
    if (samples.empty()) return 0.0;
    return nn::error(params, act, errcfg, samples) / static_cast<double>(samples.size());
}

}  // namespace

std::uint64_t model_init_seed(std::uint64_t base) { return mix_seed(base, 0x171); }
std::uint64_t embedding_seed(std::uint64_t base) { return mix_seed(base, 0xE4B); }
std::uint64_t server_seed(std::uint64_t base, std::size_t server_id) {
    return mix_seed(base, 0x5EB0, server_id);
}
std::uint64_t client_round_seed(std::uint64_t base, std::size_t round, std::size_t client_id) {
    return mix_seed(base, round, client_id);
}

void validate(const FederationConfig& cfg) {
    require(cfg.n_clients >= 1, Errc::invalid_spec, "n_clients must be positive");
    require(cfg.n_servers >= 1, Errc::invalid_spec, "n_servers must be positive");
    require(cfg.clients_per_round >= 1, Errc::invalid_count,
            "clients_per_round must be positive");
    require(cfg.clients_per_round <= cfg.n_clients, Errc::invalid_count,
            "clients_per_round exceeds n_clients");
    require(cfg.t_g > 0.0, Errc::nonpositive_granularity, "t_g must be positive");
    require(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0, Errc::invalid_spec,
            "test_fraction out of [0, 1)");
    require(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0, Errc::invalid_spec,
            "val_fraction out of [0, 1)");
}

Partition partition_model(const NetworkParams& global, std::size_t n_samples,
                          const graph::Graynet& net, const FederationConfig& cfg) {
    (void)net;  // partitioning is granularity-driven only through cfg at desk scale
    const std::size_t n_layers = global.layers.size();
    require(cfg.n_servers <= n_layers, Errc::too_many_servers,
            "more servers than layers to assign");

    Partition partition;
    const std::size_t base = n_layers / cfg.n_servers;
    const std::size_t extra = n_layers % cfg.n_servers;
    std::size_t lo = 0;
    for (std::size_t s = 0; s < cfg.n_servers; ++s) {
        const std::size_t size = base + (s < extra ? 1 : 0);
        partition.layer_ranges[s] = {lo, lo + size};
        lo += size;
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
        partition.data_shards[i % cfg.n_servers].push_back(i);
    }
    for (std::size_t s = 0; s < cfg.n_servers; ++s) {
        partition.data_shards.try_emplace(s);
    }
    return partition;
}

void Mailbox::record(const std::string& kind, const NetworkParams& params) {
    Entry entry;
    entry.kind = kind;
    std::vector<std::uint8_t> payload = nn::serialize_params(params);
    entry.bytes = payload.size();
    if (keep_payloads) entry.payload = std::move(payload);
    entries.push_back(std::move(entry));
}

std::uint64_t Mailbox::total_bytes() const {
    std::uint64_t total = 0;
    for (const Entry& e : entries) total += e.bytes;
    return total;
}

nn::NetworkParams aggregate(std::span<const ClientUpdate> updates) {
    require(!updates.empty(), Errc::empty_update_set, "no updates to aggregate");
    const NetworkParams& first = updates.front().params;
    double total_weight = 0.0;
    for (const ClientUpdate& u : updates) {
        require(u.n_samples >= 1, Errc::invalid_count, "update with zero samples");
        require(u.params.layers.size() == first.layers.size(), Errc::shape_mismatch,
                "update depth differs");
        for (std::size_t li = 0; li < first.layers.size(); ++li) {
            require(u.params.layers[li].units_in == first.layers[li].units_in &&
                        u.params.layers[li].units_out == first.layers[li].units_out,
                    Errc::shape_mismatch, "update layer widths differ");
        }
        total_weight += static_cast<double>(u.n_samples);
    }

    NetworkParams out = first;
    for (nn::LayerParams& layer : out.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
    for (const ClientUpdate& u : updates) {
        const double w = static_cast<double>(u.n_samples) / total_weight;
        for (std::size_t li = 0; li < out.layers.size(); ++li) {
            nn::LayerParams& acc = out.layers[li];
            const nn::LayerParams& src = u.params.layers[li];
            for (std::size_t i = 0; i < acc.weights.size(); ++i) acc.weights[i] += w * src.weights[i];
            for (std::size_t i = 0; i < acc.biases.size(); ++i) acc.biases[i] += w * src.biases[i];
        }
    }
    return out;
}

std::vector<std::size_t> select_clients(std::size_t n_clients, std::size_t clients_per_round,
                                        std::size_t round, std::uint64_t seed) {
    require(n_clients >= 1, Errc::invalid_count, "no clients to select from");
    require(clients_per_round >= 1 && clients_per_round <= n_clients, Errc::invalid_count,
            "clients_per_round out of range");
    Rng rng(mix_seed(seed, 0x5E1E, round));
    std::vector<std::size_t> picked = rng.sample_without_replacement(n_clients, clients_per_round);
    std::sort(picked.begin(), picked.end());
    return picked;
}

std::string RoundLog::to_json() const {
    nlohmann::json doc;
    doc["round"] = round;
    doc["selected_clients"] = selected_clients;
    doc["pre_error"] = pre_error;
    doc["post_error"] = post_error;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum));
    doc["checksum"] = hex;
    doc["bytes_up"] = bytes_up;
    doc["bytes_down"] = bytes_down;
    doc["messages"] = messages;
    doc["accepted"] = accepted;
    return doc.dump();
}

void write_round_logs(const std::string& path, std::span<const RoundLog> logs) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot open " + path);
    for (const RoundLog& log : logs) out << log.to_json() << "\n";
    require(out.good(), Errc::io_error, "write failed: " + path);
}

FederationData split_public_pool(std::vector<io::FlowRecord> d_g,
                                 std::vector<std::vector<io::FlowRecord>> d_ps,
                                 std::vector<io::ActionSample> d_a,
                                 std::vector<io::RelationSample> d_r,
                                 const FederationConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    FederationData data;
    data.d_ps = std::move(d_ps);
    data.d_a = std::move(d_a);
    data.d_r = std::move(d_r);

    std::vector<std::size_t> order(d_g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x5711));
    rng.shuffle(order);

    const auto n_test = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(d_g.size())));
    const auto n_val = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(d_g.size() - n_test)));
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        io::FlowRecord& flow = d_g[order[rank]];
        if (rank < n_test) {
            data.d_g_test.push_back(std::move(flow));
        } else if (rank < n_test + n_val) {
            data.d_g_val.push_back(std::move(flow));
        } else {
            data.d_g_train.push_back(std::move(flow));
        }
    }
    return data;
}

io::Label classify(const NetworkParams& params, const nn::ActivationSpec& act,
                   const nn::Sample& sample) {
    const auto trace = nn::forward(params, act, sample.x);
    const std::vector<double>& y = trace.output();
    return y[0] >= y[1] ? io::Label::Anomaly : io::Label::Normal;
}

FederationResult run_federation(const graph::ActionRelationalGraph& g,
                                const FederationConfig& cfg, const trainer::TrainConfig& train_cfg,
                                const pipeline::HyperParams& hp, const nn::ActivationSpec& act,
                                const nn::ErrorConfig& errcfg, bool train_embedding,
                                const FederationData& data, double xi, const SimCost& sim,
                                Mailbox* mailbox) {
    validate(cfg);
    trainer::validate(train_cfg);
    pipeline::validate(hp);
    require(data.d_ps.size() == cfg.n_clients, Errc::invalid_count,
            "one private dataset per client required");
    require(!data.d_g_train.empty() && !data.d_g_val.empty(), Errc::empty_dataset,
            "public train/validation data required");

    FederationResult result;

    // Shared model and shared embedding, both reproducible from the seed.
    const pipeline::EmbeddingTable table =
        pipeline::EmbeddingTable::seeded(hp.embed_dim, embedding_seed(train_cfg.seed));
    Rng init_rng(model_init_seed(train_cfg.seed));
    NetworkParams global = nn::init_network(hp.feature_width(), train_cfg.hidden_width, 2,
                                            train_cfg.initial_depth, nn::Role::Congruity,
                                            init_rng);

    // The trainer's depth cap is the packet-level extraction depth.
    trainer::TrainConfig server_cfg = train_cfg;
    server_cfg.depth_cap = std::max(hp.extract_depth, train_cfg.initial_depth);

    // Broker-side featurization of the public pool.
    trainer::SplitDataset d_g;
    d_g.train = pipeline::featurize_all(data.d_g_train, hp, table);
    d_g.val = pipeline::featurize_all(data.d_g_val, hp, table);

    // Graynet over every subject/object seed.
    std::vector<std::string> subject_seeds;
    for (const graph::Subject& s : g.subjects) subject_seeds.push_back(s.id);
    std::vector<std::string> object_seeds;
    for (const graph::Object& o : g.objects) object_seeds.push_back(o.id);
    result.graynet = graph::granularize(g, cfg.t_g, subject_seeds, object_seeds);

    Partition partition = partition_model(global, d_g.train.size(), result.graynet, cfg);

    // Server phase. Every server trains a full copy on its shard; the broker
    // stitches the owned ranges back together and accepts the merge only if
    // validation does not degrade. Depth adaptation is reserved for the
    // server owning the output layer so ranges stay aligned.
    const std::vector<nn::Sample> d_a_samples =
        trainer::encode_action_samples(data.d_a, global.input_width(), global.output_width());
    const std::vector<nn::Sample> d_r_samples =
        trainer::encode_relation_samples(data.d_r, global.input_width(), global.output_width());

    std::vector<ServerUpdate> server_updates;
    for (const auto& [server_id, range] : partition.layer_ranges) {
        trainer::TrainConfig cfg_s = server_cfg;
        cfg_s.seed = server_seed(train_cfg.seed, server_id);

        trainer::SplitDataset shard;
        for (std::size_t idx : partition.data_shards.at(server_id)) {
            shard.train.push_back(d_g.train[idx]);
        }
        shard.val = d_g.val;
        if (shard.train.empty()) shard.train = d_g.train;  // tiny-pool fallback

        if (mailbox) mailbox->record("broker->server", global);

        auto [trained, rep1] = trainer::layerwise_train(global, cfg_s, act, errcfg, shard);
        result.server_report.merge(rep1);
        const bool owns_output = range.hi == global.layers.size();
        if (owns_output) {
            auto [deepened, rep2] = trainer::adapt_depth(std::move(trained), cfg_s, act, errcfg,
                                                         shard);
            trained = std::move(deepened);
            result.server_report.merge(rep2);
        }
        trainer::PhaseDatasets phases;
        phases.d_a = d_a_samples;
        phases.d_r = d_r_samples;
        phases.d_g = shard;
        trainer::TrainReport rep3;
        trained = trainer::constrained_phases(std::move(trained), cfg_s, act, errcfg, phases,
                                              &rep3);
        result.server_report.merge(rep3);

        ServerUpdate update{server_id, std::move(trained), shard.train.size()};
        if (mailbox) mailbox->record("server->broker", update.params);
        server_updates.push_back(std::move(update));
    }

    // Merge owned ranges by layer index; grown layers come from the server
    // holding the tail range.
    NetworkParams merged = global;
    for (const ServerUpdate& update : server_updates) {
        const LayerRange range = partition.layer_ranges.at(update.server_id);
        const bool owns_output = range.hi == global.layers.size();
        if (owns_output) {
            merged.layers.resize(update.params.layers.size());
            merged.hidden_layers = update.params.hidden_layers;
            merged.output_support = update.params.output_support;
            for (std::size_t li = range.lo; li < update.params.layers.size(); ++li) {
                merged.layers[li] = update.params.layers[li];
            }
        } else {
            for (std::size_t li = range.lo; li < range.hi; ++li) {
                merged.layers[li] = update.params.layers[li];
            }
        }
    }
    {
        RoundLog log;
        log.round = 0;
        log.pre_error = mean_error(global, act, errcfg, d_g.val);
        const double merged_err = mean_error(merged, act, errcfg, d_g.val);
        log.accepted = merged_err <= log.pre_error;
        if (log.accepted) global = std::move(merged);
        log.post_error = log.accepted ? merged_err : log.pre_error;
        log.checksum = nn::params_checksum(global);
        if (mailbox) {
            for (const Mailbox::Entry& e : mailbox->entries) {
                if (e.kind == "broker->server") {
                    log.bytes_down += e.bytes;
                } else {
                    log.bytes_up += e.bytes;
                }
            }
            log.messages = mailbox->entries.size();
        }
        result.rounds.push_back(std::move(log));
    }

    // Re-validate the graynet and partitioning against the (static) graph;
    // depth growth may have changed the layer count.
    result.graynet = graph::granularize(g, cfg.t_g, subject_seeds, object_seeds);
    partition = partition_model(global, d_g.train.size(), result.graynet, cfg);

    // Synchronous client rounds.
    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        RoundLog log;
        log.round = round;
        log.selected_clients = select_clients(cfg.n_clients, cfg.clients_per_round, round,
                                              cfg.selection_seed);
        log.pre_error = mean_error(global, act, errcfg, d_g.val);

        const std::size_t mailbox_before = mailbox ? mailbox->entries.size() : 0;
        std::vector<ClientUpdate> updates;
        for (std::size_t client : log.selected_clients) {
            const std::vector<io::FlowRecord>& flows = data.d_ps[client];
            if (flows.empty()) continue;  // nothing to learn from
            if (mailbox) mailbox->record("broker->client", global);

            trainer::TrainConfig cfg_c = train_cfg;
            cfg_c.seed = client_round_seed(train_cfg.seed, round, client);
            trainer::ClientEnv env{hp, table, train_embedding};
            trainer::TrainReport rep;
            NetworkParams local = trainer::client_local_train(global, cfg_c, act, errcfg,
                                                              std::move(env), flows, &rep);
            result.steps += rep.steps;

            ClientUpdate update{client, std::move(local), flows.size()};
            if (mailbox) mailbox->record("client->broker", update.params);
            updates.push_back(std::move(update));
        }
        if (!updates.empty()) global = aggregate(updates);

        log.post_error = mean_error(global, act, errcfg, d_g.val);
        log.checksum = nn::params_checksum(global);
        if (mailbox) {
            std::uint64_t up = 0, down = 0;
            for (std::size_t i = mailbox_before; i < mailbox->entries.size(); ++i) {
                const Mailbox::Entry& e = mailbox->entries[i];
                if (e.kind == "broker->client") {
                    down += e.bytes;
                } else {
                    up += e.bytes;
                }
            }
            log.bytes_down = down;
            log.bytes_up = up;
            log.messages = mailbox->entries.size() - mailbox_before;
        }
        result.rounds.push_back(std::move(log));
    }

    // Final generalization error on the held-out labeled test split.
    if (!data.d_g_test.empty()) {
        for (const io::FlowRecord& flow : data.d_g_test) {
            if (flow.label == io::Label::Unlabeled) continue;
            const nn::Sample sample = pipeline::featurize(flow, hp, table);
            result.test_predictions.push_back(
                {flow.flow_id, classify(global, act, sample), flow.label});
        }
        const metrics::ConfusionRates rates = metrics::confusion(result.test_predictions, xi);
        result.e_star = metrics::g_error(rates);
    }

    result.steps += result.server_report.steps;
    std::uint64_t bytes = 0;
    for (const RoundLog& log : result.rounds) bytes += log.bytes_up + log.bytes_down;
    result.sim_seconds =
        static_cast<double>(result.steps) * sim.step_cost_s +
        (sim.bytes_per_s > 0 ? static_cast<double>(bytes) / sim.bytes_per_s : 0.0);
    result.params = std::move(global);
    return result;
}

}  // namespace graynet::fed
