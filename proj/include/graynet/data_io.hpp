#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graynet/data_labels.hpp"
#include "graynet/graph.hpp"

namespace graynet::io {

// One traffic flow: ordered packets of raw bytes, a label and the private
// attribute map that never leaves the owning client.
struct FlowRecord {
    std::string flow_id;
    std::vector<std::vector<std::uint8_t>> packets;
    Label label = Label::Unlabeled;
    std::map<std::string, std::string> attributes;
};

enum class ByteOrder { Big, Little };

struct CapturePacket {
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_usec = 0;
    std::uint32_t orig_len = 0;
    std::vector<std::uint8_t> data;

    double timestamp() const { return ts_sec + ts_usec * 1e-6; }
};

struct CaptureFile {
    ByteOrder byte_order = ByteOrder::Little;
    std::uint32_t snaplen = 65535;
    std::uint32_t network = 1;
    std::vector<CapturePacket> packets;
};

// Classic fixed-layout capture container: 24-byte global header, 16-byte
// per-record headers, both byte orders.
CaptureFile read_capture(std::span<const std::uint8_t> bytes);
CaptureFile read_capture_file(const std::string& path);
std::vector<std::uint8_t> write_capture(const CaptureFile& capture);

// Groups consecutive packets into flows whenever the inter-packet time gap
// stays within the window; emitted flows are unlabeled.
std::vector<FlowRecord> capture_to_flows(const CaptureFile& capture, double window_seconds);

struct IndexRange {
    std::size_t lo = 0;
    std::size_t hi = 0;  // inclusive
};

// Recipe for the desk-scale synthetic corpus.
struct SynthSpec {
    std::size_t n_flows = 1000;
    double anomaly_fraction = 0.1;
    std::size_t n_clients = 4;
    double skew = 0.5;  // non-IID concentration; smaller = more skewed
    std::uint64_t seed = 1;
    IndexRange packet_len_range{32, 128};
    IndexRange packets_per_flow_range{2, 8};
    double public_fraction = 0.5;
};

void validate(const SynthSpec& spec);

// Training tuples distilled from the interaction graph: endpoint attributes
// as features, observed duration / weights as regression targets.
struct ActionSample {
    std::string from;
    std::string to;
    double duration = 0.0;
    std::array<double, 4> features{};
};

struct RelationSample {
    std::string endpoint_a;
    std::string endpoint_b;
    graph::RelationClass kind = graph::RelationClass::SubjectSubject;
    double w_forward = 0.0;
    double w_backward = 0.0;
    std::array<double, 4> features{};
};

struct SynthData {
    std::vector<FlowRecord> d_g;                  // public pool
    std::vector<std::vector<FlowRecord>> d_ps;    // private pool, one list per client
    std::vector<ActionSample> d_a;
    std::vector<RelationSample> d_r;
    graph::ActionRelationalGraph graph;
};

// Every anomaly flow carries this 4-byte marker; normal flows are built so
// they can never contain it.
constexpr std::array<std::uint8_t, 4> kAnomalyMotif{0xDE, 0xAD, 0xBE, 0xEF};

// Pure function of the spec: seeded byte distributions per class, motif
// injection, label-skewed client allocation, matching actional/relational
// tuples and interaction graph.
SynthData synthesize(const SynthSpec& spec);

// Line-oriented flow files, one record per line.
void write_flows(std::ostream& out, std::span<const FlowRecord> flows);
std::vector<FlowRecord> read_flows(std::istream& in);
void write_flows_file(const std::string& path, std::span<const FlowRecord> flows);
std::vector<FlowRecord> read_flows_file(const std::string& path);

void write_action_samples_file(const std::string& path, std::span<const ActionSample> rows);
std::vector<ActionSample> read_action_samples_file(const std::string& path);
void write_relation_samples_file(const std::string& path, std::span<const RelationSample> rows);
std::vector<RelationSample> read_relation_samples_file(const std::string& path);

std::string hex_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> hex_decode(const std::string& text);

}  // namespace graynet::io
