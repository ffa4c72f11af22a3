#include <doctest.h>

#include <cmath>
#include <set>

#include "graynet/det_rng.hpp"
#include "graynet/federation.hpp"

using namespace graynet;
using namespace graynet::fed;
using nn::NetworkParams;

namespace {

NetworkParams net_with_layers(std::size_t hidden_layers, std::uint64_t seed) {
    Rng rng(seed);
    return nn::init_network(8, 4, 2, hidden_layers, nn::Role::Congruity, rng);
}

NetworkParams constant_net(double value) {
    NetworkParams p = net_with_layers(0, 1);
    for (nn::LayerParams& l : p.layers) {
        std::fill(l.weights.begin(), l.weights.end(), value);
        std::fill(l.biases.begin(), l.biases.end(), value);
    }
    return p;
}

graph::Graynet trivial_graynet() {
    const auto g = graph::build_graph({{"s0", 0, 0}}, {{"o0", 0, 0}}, {}, {}, {});
    return graph::granularize(g, 1.0, std::vector<std::string>{"s0"},
                              std::vector<std::string>{"o0"});
}

struct SmallWorld {
    io::SynthData data;
    FederationConfig cfg;
    trainer::TrainConfig train;
    pipeline::HyperParams hp;
    nn::ErrorConfig errcfg;
    FederationData fed_data;
};

SmallWorld small_world(std::uint64_t seed, std::size_t rounds, std::size_t n_clients = 2) {
    SmallWorld w;
    io::SynthSpec spec;
    spec.n_flows = 80;
    spec.anomaly_fraction = 0.25;
    spec.n_clients = n_clients;
    spec.skew = 1.0;
    spec.seed = seed;
    spec.packet_len_range = {8, 16};
    spec.packets_per_flow_range = {1, 2};
    spec.public_fraction = 0.5;
    w.data = io::synthesize(spec);

    w.cfg.n_clients = n_clients;
    w.cfg.n_servers = 1;
    w.cfg.rounds = rounds;
    w.cfg.clients_per_round = 1;
    w.cfg.selection_seed = seed + 1;

    w.train.learning_rate = 0.05;
    w.train.batch_size = 16;
    w.train.max_epochs = 3;
    w.train.patience = 2;
    w.train.hidden_width = 8;
    w.train.initial_depth = 1;
    w.train.seed = seed + 2;

    w.hp.embed_dim = 4;
    w.hp.packet_len = 8;
    w.hp.max_packets = 2;
    w.hp.support_size = 16;
    w.hp.extract_depth = 2;

    w.errcfg.lambda = {0.0};

    w.fed_data = split_public_pool(w.data.d_g, w.data.d_ps, w.data.d_a, w.data.d_r, w.cfg,
                                   seed + 3);
    return w;
}

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("partition_model: one server owns everything") {
    const NetworkParams p = net_with_layers(1, 2);  // 3 layers
    FederationConfig cfg;
    cfg.n_servers = 1;
    const Partition part = partition_model(p, 10, trivial_graynet(), cfg);
    REQUIRE(part.layer_ranges.size() == 1);
    CHECK(part.layer_ranges.at(0).lo == 0);
    CHECK(part.layer_ranges.at(0).hi == 3);
    CHECK(part.data_shards.at(0).size() == 10);
}

TEST_CASE("partition_model: four layers across two servers") {
    const NetworkParams p = net_with_layers(2, 3);  // 4 layers
    FederationConfig cfg;
    cfg.n_servers = 2;
    const Partition part = partition_model(p, 4, trivial_graynet(), cfg);
    CHECK(part.layer_ranges.at(0).lo == 0);
    CHECK(part.layer_ranges.at(0).hi == 2);
    CHECK(part.layer_ranges.at(1).lo == 2);
    CHECK(part.layer_ranges.at(1).hi == 4);
    // Round-robin shards: even indices to server 0.
    CHECK(part.data_shards.at(0) == std::vector<std::size_t>{0, 2});
    CHECK(part.data_shards.at(1) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("partition_model: five layers across two servers takes the remainder early") {
    const NetworkParams p = net_with_layers(3, 4);  // 5 layers
    FederationConfig cfg;
    cfg.n_servers = 2;
    const Partition part = partition_model(p, 0, trivial_graynet(), cfg);
    CHECK(part.layer_ranges.at(0).size() == 3);
    CHECK(part.layer_ranges.at(1).size() == 2);
}

TEST_CASE("partition_model: more servers than layers") {
    const NetworkParams p = net_with_layers(0, 5);  // 2 layers
    FederationConfig cfg;
    cfg.n_servers = 3;
    try {
        partition_model(p, 0, trivial_graynet(), cfg);
        FAIL("expected TooManyServers");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::too_many_servers);
    }
}

TEST_CASE("aggregate: a single update passes through unchanged") {
    const NetworkParams p = net_with_layers(1, 6);
    const std::vector<ClientUpdate> updates{{0, p, 5}};
    const NetworkParams out = aggregate(updates);
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        for (std::size_t i = 0; i < p.layers[li].weights.size(); ++i) {
            CHECK(std::fabs(out.layers[li].weights[i] - p.layers[li].weights[i]) < 1e-15);
        }
    }
}

TEST_CASE("aggregate: identical updates are a fixed point") {
    const NetworkParams p = net_with_layers(1, 7);
    const std::vector<ClientUpdate> updates{{0, p, 1}, {1, p, 9}};
    const NetworkParams out = aggregate(updates);
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        for (std::size_t i = 0; i < p.layers[li].weights.size(); ++i) {
            CHECK(std::fabs(out.layers[li].weights[i] - p.layers[li].weights[i]) < 1e-12);
        }
    }
}

TEST_CASE("aggregate: hand-computed weighted mean") {
    const std::vector<ClientUpdate> updates{{0, constant_net(0.0), 1},
                                            {1, constant_net(1.0), 3}};
    const NetworkParams out = aggregate(updates);
    for (const nn::LayerParams& l : out.layers) {
        for (double w : l.weights) CHECK(w == doctest::Approx(0.75));
        for (double b : l.biases) CHECK(b == doctest::Approx(0.75));
    }
}

TEST_CASE("aggregate is permutation-invariant and stays within bounds") {
    Rng rng(8);
    std::vector<ClientUpdate> updates;
    for (std::size_t c = 0; c < 4; ++c) {
        updates.push_back({c, net_with_layers(1, 100 + c), 1 + rng.index(9)});
    }
    const NetworkParams forward_order = aggregate(updates);
    std::vector<ClientUpdate> reversed(updates.rbegin(), updates.rend());
    const NetworkParams reverse_order = aggregate(reversed);
    for (std::size_t li = 0; li < forward_order.layers.size(); ++li) {
        for (std::size_t i = 0; i < forward_order.layers[li].weights.size(); ++i) {
            const double a = forward_order.layers[li].weights[i];
            const double b = reverse_order.layers[li].weights[i];
            CHECK(std::fabs(a - b) < 1e-12);
            double lo = updates[0].params.layers[li].weights[i];
            double hi = lo;
            for (const ClientUpdate& u : updates) {
                lo = std::min(lo, u.params.layers[li].weights[i]);
                hi = std::max(hi, u.params.layers[li].weights[i]);
            }
            CHECK(a >= lo - 1e-12);
            CHECK(a <= hi + 1e-12);
        }
    }
}

TEST_CASE("aggregate rejects empty and mismatched updates") {
    CHECK_THROWS_AS(aggregate(std::vector<ClientUpdate>{}), Error);
    const std::vector<ClientUpdate> mismatched{{0, net_with_layers(0, 1), 1},
                                               {1, net_with_layers(1, 1), 1}};
    CHECK_THROWS_AS(aggregate(mismatched), Error);
    const std::vector<ClientUpdate> zero_weight{{0, net_with_layers(0, 1), 0}};
    CHECK_THROWS_AS(aggregate(zero_weight), Error);
}

TEST_CASE("select_clients: one client is always client zero") {
    for (std::size_t round = 0; round < 5; ++round) {
        CHECK(select_clients(1, 1, round, 42) == std::vector<std::size_t>{0});
    }
}

TEST_CASE("select_clients is a pure function of seed and round") {
    CHECK(select_clients(10, 3, 7, 5) == select_clients(10, 3, 7, 5));
    CHECK(select_clients(10, 3, 7, 5) != select_clients(10, 3, 8, 5));
}

TEST_CASE("select_clients: draws are near-uniform over many rounds") {
    std::vector<std::size_t> counts(10, 0);
    for (std::size_t round = 0; round < 10000; ++round) {
        for (std::size_t c : select_clients(10, 1, round, 99)) ++counts[c];
    }
    for (std::size_t c = 0; c < 10; ++c) {
        CHECK(counts[c] >= 900);
        CHECK(counts[c] <= 1100);
    }
}

TEST_CASE("select_clients validates the count") {
    CHECK_THROWS_AS(select_clients(3, 4, 0, 1), Error);
    CHECK_THROWS_AS(select_clients(3, 0, 0, 1), Error);
}

TEST_CASE("run_federation: zero rounds still evaluates the server-phase model") {
    SmallWorld w = small_world(50, 0);
    const FederationResult result =
        run_federation(w.data.graph, w.cfg, w.train, w.hp, nn::ActivationSpec{}, w.errcfg,
                       false, w.fed_data, 0.35);
    CHECK(result.rounds.size() == 1);  // only the server-merge record
    CHECK(result.e_star >= 0.0);
    CHECK(result.e_star <= 1.0);
    CHECK(!result.test_predictions.empty());
}

TEST_CASE("run_federation: fixed seed gives identical round checksums") {
    SmallWorld w1 = small_world(60, 3);
    SmallWorld w2 = small_world(60, 3);
    const FederationResult a =
        run_federation(w1.data.graph, w1.cfg, w1.train, w1.hp, nn::ActivationSpec{}, w1.errcfg,
                       true, w1.fed_data, 0.35);
    const FederationResult b =
        run_federation(w2.data.graph, w2.cfg, w2.train, w2.hp, nn::ActivationSpec{}, w2.errcfg,
                       true, w2.fed_data, 0.35);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
        CHECK(a.rounds[r].checksum == b.rounds[r].checksum);
        CHECK(a.rounds[r].selected_clients == b.rounds[r].selected_clients);
    }
    CHECK(a.e_star == b.e_star);
}

TEST_CASE("run_federation: one log per round, checksums move only across rounds") {
    SmallWorld w = small_world(70, 4);
    Mailbox mailbox;
    const FederationResult result =
        run_federation(w.data.graph, w.cfg, w.train, w.hp, nn::ActivationSpec{}, w.errcfg,
                       false, w.fed_data, 0.35, SimCost{}, &mailbox);
    CHECK(result.rounds.size() == 5);  // merge record + 4 rounds
    for (std::size_t r = 0; r < result.rounds.size(); ++r) {
        CHECK(result.rounds[r].round == r);
    }
    CHECK(result.params.hidden_layers <= w.hp.extract_depth);
    CHECK(mailbox.total_bytes() > 0);
}

TEST_CASE("run_federation: server merge is validation-gated") {
    SmallWorld w = small_world(80, 0);
    const FederationResult result =
        run_federation(w.data.graph, w.cfg, w.train, w.hp, nn::ActivationSpec{}, w.errcfg,
                       false, w.fed_data, 0.35);
    const RoundLog& merge = result.rounds.front();
    if (merge.accepted) {
        CHECK(merge.post_error <= merge.pre_error);
    } else {
        CHECK(merge.post_error == merge.pre_error);
    }
}

TEST_CASE("run_federation distributes work across multiple servers") {
    SmallWorld w = small_world(90, 1);
    w.cfg.n_servers = 2;
    w.train.initial_depth = 2;  // four layers to split
    const FederationResult result =
        run_federation(w.data.graph, w.cfg, w.train, w.hp, nn::ActivationSpec{}, w.errcfg,
                       false, w.fed_data, 0.35);
    CHECK(result.e_star >= 0.0);
    CHECK(result.e_star <= 1.0);
}

TEST_CASE("messages carry parameters and sample counts only") {
    // The inward message type is the privacy boundary: parameters plus a
    // sample count, nothing else. Spelled out as compile-time facts.
    static_assert(std::is_same_v<decltype(ClientUpdate::params), nn::NetworkParams>);
    static_assert(std::is_same_v<decltype(ClientUpdate::n_samples), std::size_t>);
    static_assert(std::is_same_v<decltype(ClientUpdate::client_id), std::size_t>);
    static_assert(sizeof(ClientUpdate) ==
                  sizeof(std::size_t) * 2 + sizeof(nn::NetworkParams));

    // Runtime half: every recorded payload parses back as bare parameters.
    SmallWorld w = small_world(95, 2);
    Mailbox mailbox;
    mailbox.keep_payloads = true;
    run_federation(w.data.graph, w.cfg, w.train, w.hp, nn::ActivationSpec{}, w.errcfg, false,
                   w.fed_data, 0.35, SimCost{}, &mailbox);
    REQUIRE(!mailbox.entries.empty());
    for (const Mailbox::Entry& entry : mailbox.entries) {
        CHECK_NOTHROW(nn::parse_params(entry.payload));
    }
}

TEST_CASE("round logs render as one record per line") {
    RoundLog log;
    log.round = 3;
    log.selected_clients = {1, 4};
    log.pre_error = 0.5;
    log.post_error = 0.25;
    log.checksum = 0xDEADBEEF;
    const std::string text = log.to_json();
    CHECK(text.find("\"round\":3") != std::string::npos);
    CHECK(text.find("00000000deadbeef") != std::string::npos);
    CHECK(text.find('\n') == std::string::npos);
}

}  // TEST_SUITE
