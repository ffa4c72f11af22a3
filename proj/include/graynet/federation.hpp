#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graynet/graph.hpp"
#include "graynet/metrics.hpp"
#include "graynet/trainer.hpp"

namespace graynet::fed {

enum class Aggregation { WeightedAverage };

struct FederationConfig {
    std::size_t n_clients = 1;
    std::size_t n_servers = 1;
    std::size_t rounds = 1;
    std::size_t clients_per_round = 1;
    std::uint64_t selection_seed = 0;
    Aggregation aggregation = Aggregation::WeightedAverage;
    double t_g = 1.0;
    double test_fraction = 0.2;  // held-out share of the public pool
    double val_fraction = 0.25;  // validation share of the remaining pool
};

void validate(const FederationConfig& cfg);

struct LayerRange {
    std::size_t lo = 0;  // first layer index owned
    std::size_t hi = 0;  // one past the last
    std::size_t size() const { return hi - lo; }
};

// Which layers and which public-data shard each server owns.
struct Partition {
    std::map<std::size_t, LayerRange> layer_ranges;
    std::map<std::size_t, std::vector<std::size_t>> data_shards;
};

// Contiguous layer ranges as equal as possible (earlier servers take the
// remainder); data shards round-robin by sample index.
Partition partition_model(const nn::NetworkParams& global, std::size_t n_samples,
                          const graph::Graynet& net, const FederationConfig& cfg);

// The only message type a client may send inward: parameters plus a sample
// count. Keeping flow payloads out of broker reach is a type-level rule.
struct ClientUpdate {
    std::size_t client_id = 0;
    nn::NetworkParams params;
    std::size_t n_samples = 0;
};

// Broker-to-participant model snapshot.
struct ModelDownlink {
    std::size_t recipient = 0;
    nn::NetworkParams params;
};

// Server result after its local optimization passes.
struct ServerUpdate {
    std::size_t server_id = 0;
    nn::NetworkParams params;
    std::size_t n_samples = 0;
};

// Records every cross-role message (direction, serialized payload size, and
// the payload bytes for auditing).
struct Mailbox {
    struct Entry {
        std::string kind;
        std::size_t bytes = 0;
        std::vector<std::uint8_t> payload;
    };
    std::vector<Entry> entries;
    bool keep_payloads = false;

    void record(const std::string& kind, const nn::NetworkParams& params);
    std::uint64_t total_bytes() const;
};

// Sample-count weighted elementwise average.
nn::NetworkParams aggregate(std::span<const ClientUpdate> updates);

// Seeded uniform draw without replacement; a pure function of
// (seed, round).
std::vector<std::size_t> select_clients(std::size_t n_clients, std::size_t clients_per_round,
                                        std::size_t round, std::uint64_t seed);

struct RoundLog {
    std::size_t round = 0;
    std::vector<std::size_t> selected_clients;
    double pre_error = 0.0;
    double post_error = 0.0;
    std::uint64_t checksum = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::size_t messages = 0;
    bool accepted = true;

    std::string to_json() const;
};

void write_round_logs(const std::string& path, std::span<const RoundLog> logs);

struct FederationData {
    std::vector<io::FlowRecord> d_g_train;
    std::vector<io::FlowRecord> d_g_val;
    std::vector<io::FlowRecord> d_g_test;
    std::vector<std::vector<io::FlowRecord>> d_ps;
    std::vector<io::ActionSample> d_a;
    std::vector<io::RelationSample> d_r;
};

// Deterministic three-way split of a public flow pool.
FederationData split_public_pool(std::vector<io::FlowRecord> d_g,
                                 std::vector<std::vector<io::FlowRecord>> d_ps,
                                 std::vector<io::ActionSample> d_a,
                                 std::vector<io::RelationSample> d_r,
                                 const FederationConfig& cfg, std::uint64_t seed);

struct FederationResult {
    nn::NetworkParams params;
    double e_star = 0.0;
    std::vector<RoundLog> rounds;
    graph::Graynet graynet;
    trainer::TrainReport server_report;
    std::vector<metrics::Prediction> test_predictions;
    std::size_t steps = 0;
    double sim_seconds = 0.0;
};

struct SimCost {
    double step_cost_s = 1e-4;
    double bytes_per_s = 1e6;
};

// Seed wiring used by the broker, exposed so equivalent schedules can be
// reproduced outside the federation.
std::uint64_t model_init_seed(std::uint64_t base);
std::uint64_t embedding_seed(std::uint64_t base);
std::uint64_t server_seed(std::uint64_t base, std::size_t server_id);
std::uint64_t client_round_seed(std::uint64_t base, std::size_t round, std::size_t client_id);

// The whole broker procedure: init, granularize, partition, server passes
// with a validation-gated merge, synchronous client rounds with weighted
// aggregation, final generalization error on the held-out test split.
FederationResult run_federation(const graph::ActionRelationalGraph& g,
                                const FederationConfig& cfg, const trainer::TrainConfig& train_cfg,
                                const pipeline::HyperParams& hp, const nn::ActivationSpec& act,
                                const nn::ErrorConfig& errcfg, bool train_embedding,
                                const FederationData& data, double xi,
                                const SimCost& sim = SimCost{}, Mailbox* mailbox = nullptr);

// Classify a flow with the shared model: anomaly wins output ties.
io::Label classify(const nn::NetworkParams& params, const nn::ActivationSpec& act,
                   const nn::Sample& sample);

}  // namespace graynet::fed
