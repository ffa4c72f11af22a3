#include "graynet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace graynet::pipeline {

void validate(const HyperParams& hp) {
    require(hp.embed_dim >= 1, Errc::invalid_spec, "embed_dim must be positive");
    require(hp.extract_depth >= 1, Errc::invalid_spec, "extract_depth must be positive");
    require(hp.support_size >= 1, Errc::invalid_spec, "support_size must be positive");
    require(hp.packet_len >= 1, Errc::invalid_spec, "packet_len must be positive");
    require(hp.max_packets >= 1, Errc::invalid_spec, "max_packets must be positive");
}

EmbeddingTable EmbeddingTable::seeded(std::size_t embed_dim, std::uint64_t seed) {
    // Range-binned rows: byte value b activates the channel covering its
    // slice of 0..255, with seeded jitter on the active entry. Byte-value
    // distribution shifts then show up as which channels carry spread
    // after per-flow normalization, instead of being rescaled away.
    EmbeddingTable t;
    t.embed_dim = embed_dim;
    t.seed = seed;
    t.table.assign(256 * embed_dim, 0.0);
    Rng rng(mix_seed(seed, 0xE3BD));
    for (std::size_t b = 0; b < 256; ++b) {
        const std::size_t bin = b * embed_dim / 256;
        t.table[b * embed_dim + bin] = 1.0 + rng.uniform(-0.05, 0.05);
    }
    return t;
}

std::vector<std::vector<std::uint8_t>> segment_flow(const io::FlowRecord& flow,
                                                    const HyperParams& hp) {
    require(!flow.packets.empty(), Errc::empty_flow, "flow has no packets: " + flow.flow_id);
    const std::size_t keep = std::min(flow.packets.size(), hp.max_packets);
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(keep);
    for (std::size_t p = 0; p < keep; ++p) {
        std::vector<std::uint8_t> packet = flow.packets[p];
        packet.resize(hp.packet_len, 0x00);
        out.push_back(std::move(packet));
    }
    return out;
}

RawTensor embed_bytes(std::span<const std::vector<std::uint8_t>> packets,
                      const EmbeddingTable& table) {
    RawTensor raw;
    raw.packets = packets.size();
    raw.packet_len = packets.empty() ? 0 : packets.front().size();
    raw.embed_dim = table.embed_dim;
    raw.data.resize(raw.packets * raw.packet_len * raw.embed_dim);
    std::size_t pos = 0;
    for (const auto& packet : packets) {
        for (std::uint8_t byte : packet) {
            const std::span<const double> row = table.row(byte);
            std::copy(row.begin(), row.end(), raw.data.begin() + static_cast<std::ptrdiff_t>(pos));
            pos += raw.embed_dim;
        }
    }
    return raw;
}

FeatureTensor normalize_features(const RawTensor& raw, const HyperParams& hp,
                                 const std::string& flow_id, io::Label label) {
    for (double v : raw.data) {
        require(std::isfinite(v), Errc::nonfinite_value, "non-finite feature value");
    }
    require(raw.packets <= hp.max_packets, Errc::dimension_mismatch,
            "tensor holds more packets than max_packets");
    FeatureTensor out;
    out.flow_id = flow_id;
    out.label = label;
    out.packets = hp.max_packets;
    out.packet_len = raw.packet_len;
    out.embed_dim = raw.embed_dim;
    out.data.assign(out.packets * out.packet_len * out.embed_dim, 0.0);

    // Channel extrema over the actual packets only; padding stays zero.
    std::vector<double> lo(raw.embed_dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(raw.embed_dim, -std::numeric_limits<double>::infinity());
    const std::size_t cells = raw.packets * raw.packet_len;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t d = 0; d < raw.embed_dim; ++d) {
            const double v = raw.data[cell * raw.embed_dim + d];
            lo[d] = std::min(lo[d], v);
            hi[d] = std::max(hi[d], v);
        }
    }
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t d = 0; d < raw.embed_dim; ++d) {
            const double v = raw.data[cell * raw.embed_dim + d];
            const double span = hi[d] - lo[d];
            out.data[cell * raw.embed_dim + d] = span > 0.0 ? (v - lo[d]) / span : 0.5;
        }
    }
    return out;
}

std::vector<double> sparse_encode(const FeatureTensor& features, const HyperParams& hp) {
    require(hp.support_size >= 1, Errc::nonpositive_k, "support_size must be at least 1");
    return nn::project_support(features.data, hp.support_size);
}

nn::Sample featurize(const io::FlowRecord& flow, const HyperParams& hp,
                     const EmbeddingTable& table) {
    validate(hp);
    require(table.embed_dim == hp.embed_dim, Errc::dimension_mismatch,
            "embedding table width does not match embed_dim");
    const auto packets = segment_flow(flow, hp);
    const RawTensor raw = embed_bytes(packets, table);
    const FeatureTensor tensor = normalize_features(raw, hp, flow.flow_id, flow.label);
    nn::Sample sample;
    sample.x = sparse_encode(tensor, hp);
    switch (flow.label) {
        case io::Label::Anomaly:
            sample.y = {1.0, 0.0};
            sample.labeled = true;
            break;
        case io::Label::Normal:
            sample.y = {0.0, 1.0};
            sample.labeled = true;
            break;
        case io::Label::Unlabeled:
            sample.y = {0.0, 0.0};
            sample.labeled = false;
            break;
    }
    return sample;
}

std::vector<nn::Sample> featurize_all(std::span<const io::FlowRecord> flows,
                                      const HyperParams& hp, const EmbeddingTable& table) {
    std::vector<nn::Sample> samples;
    samples.reserve(flows.size());
    for (const io::FlowRecord& flow : flows) samples.push_back(featurize(flow, hp, table));
    return samples;
}

}  // namespace graynet::pipeline
