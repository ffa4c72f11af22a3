#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graynet/data_io.hpp"
#include "graynet/nn.hpp"

namespace graynet::pipeline {

// The three meta-generalization knobs plus the fixed tensor bounds.
struct HyperParams {
    std::size_t embed_dim = 32;      // byte-level embedding width
    std::size_t extract_depth = 3;   // cap on packet-level extraction depth
    std::size_t support_size = 200;  // traffic-level support-set size
    std::size_t packet_len = 256;    // bytes kept per packet
    std::size_t max_packets = 8;

    std::size_t feature_width() const { return max_packets * packet_len * embed_dim; }
};

void validate(const HyperParams& hp);

// 256-row byte lookup table, reproducible from its seed. Optionally updated
// during client-local optimization.
struct EmbeddingTable {
    std::size_t embed_dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> table;  // 256 x embed_dim, row-major

    static EmbeddingTable seeded(std::size_t embed_dim, std::uint64_t seed);

    std::span<const double> row(std::uint8_t byte) const {
        return {table.data() + std::size_t(byte) * embed_dim, embed_dim};
    }
};

// Raw per-flow embedding output: actual_packets x packet_len x embed_dim.
struct RawTensor {
    std::size_t packets = 0;
    std::size_t packet_len = 0;
    std::size_t embed_dim = 0;
    std::vector<double> data;
};

// Normalized fixed-shape tensor: max_packets x packet_len x embed_dim, all
// values inside [0, 1], absent packets zero-filled.
struct FeatureTensor {
    std::string flow_id;
    io::Label label = io::Label::Unlabeled;
    std::size_t packets = 0;  // always max_packets after normalization
    std::size_t packet_len = 0;
    std::size_t embed_dim = 0;
    std::vector<double> data;
};

// Keeps the first max_packets packets, each truncated or zero-padded to
// packet_len bytes.
std::vector<std::vector<std::uint8_t>> segment_flow(const io::FlowRecord& flow,
                                                    const HyperParams& hp);

// Pure table lookup per byte position.
RawTensor embed_bytes(std::span<const std::vector<std::uint8_t>> packets,
                      const EmbeddingTable& table);

// Per embedding-channel min-max rescale to [0, 1] over the flow's tensor;
// constant channels map to 0.5. Pads to max_packets with zero slices.
FeatureTensor normalize_features(const RawTensor& raw, const HyperParams& hp,
                                 const std::string& flow_id, io::Label label);

// Flattens and hard-thresholds to the support size, yielding the
// traffic-level sparse vector fed to the federated net.
std::vector<double> sparse_encode(const FeatureTensor& features, const HyperParams& hp);

// Full path: segment -> embed -> normalize -> sparse encode, packed as a
// training sample with a one-hot label (anomaly, normal).
nn::Sample featurize(const io::FlowRecord& flow, const HyperParams& hp,
                     const EmbeddingTable& table);

std::vector<nn::Sample> featurize_all(std::span<const io::FlowRecord> flows,
                                      const HyperParams& hp, const EmbeddingTable& table);

}  // namespace graynet::pipeline
