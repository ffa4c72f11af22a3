#include "graynet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graynet/det_rng.hpp"

namespace graynet::io {

namespace {

using nlohmann::json;

constexpr std::uint32_t kMagicNative = 0xA1B2C3D4u;
constexpr std::uint32_t kMagicSwapped = 0xD4C3B2A1u;

std::uint32_t swap32(std::uint32_t v) {
    return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) | ((v & 0x00FF0000u) >> 8) |
           ((v & 0xFF000000u) >> 24);
}

class CaptureReader {
public:
    explicit CaptureReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }

    std::uint32_t u32le() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::vector<std::uint8_t> take(std::size_t n) {
        std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put32(std::vector<std::uint8_t>& out, std::uint32_t v, bool swapped) {
    if (swapped) v = swap32(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v, bool swapped) {
    if (swapped) v = static_cast<std::uint16_t>((v << 8) | (v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

CaptureFile read_capture(std::span<const std::uint8_t> bytes) {
    CaptureReader reader(bytes);
    require(reader.has(4), Errc::bad_magic, "capture shorter than the magic");
    const std::uint32_t raw_magic = reader.u32le();
    bool swapped = false;
    if (raw_magic == kMagicNative) {
        swapped = false;
    } else if (raw_magic == kMagicSwapped) {
        swapped = true;
    } else {
        fail(Errc::bad_magic, "unrecognized capture magic");
    }
    auto fix = [swapped](std::uint32_t v) { return swapped ? swap32(v) : v; };
    require(reader.has(20), Errc::truncated_record, "global header cut short");

    CaptureFile capture;
    // The file's own byte order: a swapped read on this little-endian layout
    // means the file was written big-endian.
    capture.byte_order = swapped ? ByteOrder::Big : ByteOrder::Little;
    reader.u32le();  // version major/minor
    reader.u32le();  // thiszone
    reader.u32le();  // sigfigs
    capture.snaplen = fix(reader.u32le());
    capture.network = fix(reader.u32le());

    while (!reader.at_end()) {
        require(reader.has(16), Errc::truncated_record, "record header cut short");
        CapturePacket packet;
        packet.ts_sec = fix(reader.u32le());
        packet.ts_usec = fix(reader.u32le());
        const std::uint32_t incl_len = fix(reader.u32le());
        packet.orig_len = fix(reader.u32le());
        require(incl_len <= packet.orig_len, Errc::length_overflow,
                "captured length exceeds original length");
        require(reader.has(incl_len), Errc::truncated_record, "record payload cut short");
        packet.data = reader.take(incl_len);
        capture.packets.push_back(std::move(packet));
    }
    return capture;
}

CaptureFile read_capture_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_capture(bytes);
}

std::vector<std::uint8_t> write_capture(const CaptureFile& capture) {
    const bool swapped = capture.byte_order == ByteOrder::Big;
    std::vector<std::uint8_t> out;
    put32(out, kMagicNative, swapped);
    put16(out, 2, swapped);  // version 2.4
    put16(out, 4, swapped);
    put32(out, 0, swapped);  // thiszone
    put32(out, 0, swapped);  // sigfigs
    put32(out, capture.snaplen, swapped);
    put32(out, capture.network, swapped);
    for (const CapturePacket& packet : capture.packets) {
        put32(out, packet.ts_sec, swapped);
        put32(out, packet.ts_usec, swapped);
        put32(out, static_cast<std::uint32_t>(packet.data.size()), swapped);
        put32(out, packet.orig_len, swapped);
        out.insert(out.end(), packet.data.begin(), packet.data.end());
    }
    return out;
}

std::vector<FlowRecord> capture_to_flows(const CaptureFile& capture, double window_seconds) {
    require(window_seconds > 0.0, Errc::invalid_spec, "window must be positive");
    std::vector<FlowRecord> flows;
    double last_ts = 0.0;
    for (const CapturePacket& packet : capture.packets) {
        const double ts = packet.timestamp();
        if (flows.empty() || ts - last_ts > window_seconds) {
            FlowRecord flow;
            flow.flow_id = "capture-" + std::to_string(flows.size());
            flow.label = Label::Unlabeled;
            flows.push_back(std::move(flow));
        }
        flows.back().packets.push_back(packet.data);
        last_ts = ts;
    }
    return flows;
}

void validate(const SynthSpec& spec) {
    require(spec.n_flows >= 1, Errc::invalid_spec, "n_flows must be positive");
    require(spec.anomaly_fraction >= 0.0 && spec.anomaly_fraction <= 1.0, Errc::invalid_spec,
            "anomaly_fraction out of [0, 1]");
    require(spec.n_clients >= 1, Errc::invalid_spec, "n_clients must be positive");
    require(spec.skew > 0.0, Errc::invalid_spec, "skew must be positive");
    require(spec.packet_len_range.lo >= 8 && spec.packet_len_range.lo <= spec.packet_len_range.hi,
            Errc::invalid_spec, "packet_len_range invalid (minimum 8 bytes)");
    require(spec.packets_per_flow_range.lo >= 1 &&
                spec.packets_per_flow_range.lo <= spec.packets_per_flow_range.hi,
            Errc::invalid_spec, "packets_per_flow_range invalid");
    require(spec.public_fraction >= 0.0 && spec.public_fraction <= 1.0, Errc::invalid_spec,
            "public_fraction out of [0, 1]");
}

namespace {

std::size_t range_pick(const IndexRange& range, Rng& rng) {
    return range.lo + rng.index(range.hi - range.lo + 1);
}

// Normal traffic bytes stay strictly below 0x80, so the high-byte motif can
// never appear in them.
std::vector<std::uint8_t> normal_packet(std::size_t len, Rng& rng) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(0x20 + rng.index(0x60));
    return bytes;
}

std::vector<std::uint8_t> anomaly_packet(std::size_t len, Rng& rng) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(0x80 + rng.index(0x80));
    const std::size_t offset = rng.index(len - kAnomalyMotif.size() + 1);
    std::copy(kAnomalyMotif.begin(), kAnomalyMotif.end(),
              bytes.begin() + static_cast<std::ptrdiff_t>(offset));
    return bytes;
}

std::array<double, 4> endpoint_features(const graph::ActionRelationalGraph& g,
                                        const std::string& a, const std::string& b) {
    std::array<double, 4> f{};
    if (const graph::Subject* s = g.find_subject(a)) {
        f[0] = s->behavior;
        f[1] = s->feedback;
    } else if (const graph::Object* o = g.find_object(a)) {
        f[0] = o->state;
        f[1] = o->probability;
    }
    if (const graph::Subject* s = g.find_subject(b)) {
        f[2] = s->behavior;
        f[3] = s->feedback;
    } else if (const graph::Object* o = g.find_object(b)) {
        f[2] = o->state;
        f[3] = o->probability;
    }
    return f;
}

}  // namespace

SynthData synthesize(const SynthSpec& spec) {
    validate(spec);
    SynthData data;
    Rng rng(mix_seed(spec.seed, 0xF10F));

    // Exact anomaly count, randomized placement.
    const std::size_t n_anomaly =
        static_cast<std::size_t>(std::llround(spec.anomaly_fraction * double(spec.n_flows)));
    std::vector<Label> labels(spec.n_flows, Label::Normal);
    for (std::size_t i = 0; i < n_anomaly; ++i) labels[i] = Label::Anomaly;
    rng.shuffle(labels);

    std::vector<FlowRecord> flows;
    flows.reserve(spec.n_flows);
    for (std::size_t i = 0; i < spec.n_flows; ++i) {
        FlowRecord flow;
        flow.flow_id = "flow-" + std::to_string(i);
        flow.label = labels[i];
        const std::size_t n_packets = range_pick(spec.packets_per_flow_range, rng);
        for (std::size_t p = 0; p < n_packets; ++p) {
            const std::size_t len = range_pick(spec.packet_len_range, rng);
            flow.packets.push_back(flow.label == Label::Anomaly ? anomaly_packet(len, rng)
                                                                : normal_packet(len, rng));
        }
        flows.push_back(std::move(flow));
    }

    // Public/private cut, then label-skewed private allocation: one Dirichlet
    // draw per class over clients.
    std::vector<std::size_t> order(spec.n_flows);
    for (std::size_t i = 0; i < spec.n_flows; ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_public =
        static_cast<std::size_t>(std::llround(spec.public_fraction * double(spec.n_flows)));
    data.d_ps.resize(spec.n_clients);
    std::vector<std::size_t> private_idx;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (rank < n_public) {
            data.d_g.push_back(flows[order[rank]]);
        } else {
            private_idx.push_back(order[rank]);
        }
    }
    for (Label cls : {Label::Anomaly, Label::Normal}) {
        std::vector<double> weights(spec.n_clients);
        double total = 0.0;
        for (double& w : weights) {
            w = rng.gamma(spec.skew);
            total += w;
        }
        std::vector<double> cut(spec.n_clients, 0.0);
        double acc = 0.0;
        for (std::size_t c = 0; c < spec.n_clients; ++c) {
            acc += weights[c] / total;
            cut[c] = acc;
        }
        for (std::size_t idx : private_idx) {
            if (flows[idx].label != cls) continue;
            const double u = rng.uniform01();
            std::size_t client = spec.n_clients - 1;
            for (std::size_t c = 0; c < spec.n_clients; ++c) {
                if (u < cut[c]) {
                    client = c;
                    break;
                }
            }
            FlowRecord flow = flows[idx];
            flow.attributes["owner"] = "client-" + std::to_string(client);
            flow.attributes["device"] = "device-" + std::to_string(rng.index(16));
            data.d_ps[client].push_back(std::move(flow));
        }
    }

    // Interaction graph: one subject per client, a small server set, one
    // broker plus darknets, seeded actions and relations.
    std::vector<graph::Subject> subjects;
    for (std::size_t c = 0; c < spec.n_clients; ++c) {
        subjects.push_back({"client-" + std::to_string(c), rng.uniform(0.0, 1.0),
                            rng.uniform(0.0, 1.0)});
    }
    const std::size_t n_servers = std::max<std::size_t>(2, spec.n_clients / 2);
    std::vector<graph::Object> objects;
    for (std::size_t s = 0; s < n_servers; ++s) {
        objects.push_back({"server-" + std::to_string(s), rng.uniform(0.0, 1.0),
                           rng.uniform(0.0, 1.0)});
    }
    std::vector<graph::HiddenVertex> hidden;
    hidden.push_back({"broker-0", graph::HiddenKind::Broker});
    const std::size_t n_darknets = std::max<std::size_t>(1, spec.n_clients / 2);
    for (std::size_t d = 0; d < n_darknets; ++d) {
        hidden.push_back({"darknet-" + std::to_string(d), graph::HiddenKind::Darknet});
    }

    std::vector<graph::Action> actions;
    for (std::size_t c = 0; c < spec.n_clients; ++c) {
        for (std::size_t s = 0; s < n_servers; ++s) {
            const std::size_t n_actions = 1 + rng.index(3);
            for (std::size_t a = 0; a < n_actions; ++a) {
                const double start = rng.uniform(0.0, 100.0);
                actions.push_back({subjects[c].id, objects[s].id, start,
                                   start + rng.uniform(0.0, 4.0)});
            }
        }
    }
    for (const graph::HiddenVertex& h : hidden) {
        const std::size_t touches = 1 + rng.index(2 + spec.n_clients / 2);
        for (std::size_t t = 0; t < touches; ++t) {
            const bool to_subject = rng.index(2) == 0;
            const std::string peer = to_subject ? subjects[rng.index(subjects.size())].id
                                                : objects[rng.index(objects.size())].id;
            const double start = rng.uniform(0.0, 100.0);
            actions.push_back({h.id, peer, start, start + rng.uniform(0.0, 2.0)});
        }
    }

    std::vector<graph::Relation> relations;
    for (std::size_t c = 0; c + 1 < spec.n_clients; ++c) {
        relations.push_back({subjects[c].id, subjects[c + 1].id,
                             graph::RelationClass::SubjectSubject, rng.uniform(0.0, 2.0),
                             rng.uniform(0.0, 2.0)});
    }
    for (std::size_t s = 0; s + 1 < n_servers; ++s) {
        relations.push_back({objects[s].id, objects[s + 1].id,
                             graph::RelationClass::ObjectObject, rng.uniform(0.0, 2.0),
                             rng.uniform(0.0, 2.0)});
    }

    data.graph = graph::build_graph(subjects, objects, hidden, actions, relations);

    for (const graph::Action& a : data.graph.actions) {
        ActionSample row;
        row.from = a.from;
        row.to = a.to;
        row.duration = a.duration();
        row.features = endpoint_features(data.graph, a.from, a.to);
        data.d_a.push_back(std::move(row));
    }
    for (const graph::Relation& r : data.graph.relations) {
        RelationSample row;
        row.endpoint_a = r.endpoint_a;
        row.endpoint_b = r.endpoint_b;
        row.kind = r.kind;
        row.w_forward = r.w_forward;
        row.w_backward = r.w_backward;
        row.features = endpoint_features(data.graph, r.endpoint_a, r.endpoint_b);
        data.d_r.push_back(std::move(row));
    }
    return data;
}

std::string hex_encode(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> hex_decode(const std::string& text) {
    require(text.size() % 2 == 0, Errc::parse_error, "hex string has odd length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        const int hi = nibble(text[i]);
        const int lo = nibble(text[i + 1]);
        require(hi >= 0 && lo >= 0, Errc::parse_error, "bad hex digit");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

void write_flows(std::ostream& out, std::span<const FlowRecord> flows) {
    for (const FlowRecord& flow : flows) {
        json doc;
        doc["flow_id"] = flow.flow_id;
        doc["label"] = label_name(flow.label);
        doc["packets"] = json::array();
        for (const auto& packet : flow.packets) doc["packets"].push_back(hex_encode(packet));
        doc["attributes"] = flow.attributes;
        out << doc.dump() << "\n";
    }
}

std::vector<FlowRecord> read_flows(std::istream& in) {
    std::vector<FlowRecord> flows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json doc = json::parse(line);
            FlowRecord flow;
            flow.flow_id = doc.at("flow_id").get<std::string>();
            flow.label = parse_label(doc.at("label").get<std::string>());
            for (const json& p : doc.at("packets")) {
                flow.packets.push_back(hex_decode(p.get<std::string>()));
            }
            for (const auto& [key, value] : doc.at("attributes").items()) {
                flow.attributes[key] = value.get<std::string>();
            }
            flows.push_back(std::move(flow));
        } catch (const json::exception& e) {
            fail(Errc::parse_error,
                 "flow file line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            fail(Errc::parse_error,
                 "flow file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return flows;
}

void write_flows_file(const std::string& path, std::span<const FlowRecord> flows) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot open " + path);
    write_flows(out, flows);
    require(out.good(), Errc::io_error, "write failed: " + path);
}

std::vector<FlowRecord> read_flows_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    return read_flows(in);
}

namespace {

template <class Row, class ToJson>
void write_rows(const std::string& path, std::span<const Row> rows, ToJson to_json) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot open " + path);
    for (const Row& row : rows) out << to_json(row).dump() << "\n";
    require(out.good(), Errc::io_error, "write failed: " + path);
}

template <class Row, class FromJson>
std::vector<Row> read_rows(const std::string& path, FromJson from_json) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            rows.push_back(from_json(json::parse(line)));
        } catch (const json::exception& e) {
            fail(Errc::parse_error, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

}  // namespace

void write_action_samples_file(const std::string& path, std::span<const ActionSample> rows) {
    write_rows<ActionSample>(path, rows, [](const ActionSample& row) {
        return json{{"from", row.from},
                    {"to", row.to},
                    {"duration", row.duration},
                    {"features", row.features}};
    });
}

std::vector<ActionSample> read_action_samples_file(const std::string& path) {
    return read_rows<ActionSample>(path, [](const json& doc) {
        ActionSample row;
        row.from = doc.at("from").get<std::string>();
        row.to = doc.at("to").get<std::string>();
        row.duration = doc.at("duration").get<double>();
        const auto f = doc.at("features").get<std::vector<double>>();
        require(f.size() == row.features.size(), Errc::parse_error, "bad feature arity");
        std::copy(f.begin(), f.end(), row.features.begin());
        return row;
    });
}

void write_relation_samples_file(const std::string& path, std::span<const RelationSample> rows) {
    write_rows<RelationSample>(path, rows, [](const RelationSample& row) {
        return json{{"endpoint_a", row.endpoint_a},
                    {"endpoint_b", row.endpoint_b},
                    {"class", row.kind == graph::RelationClass::SubjectSubject ? "subject_subject"
                                                                               : "object_object"},
                    {"w_forward", row.w_forward},
                    {"w_backward", row.w_backward},
                    {"features", row.features}};
    });
}

std::vector<RelationSample> read_relation_samples_file(const std::string& path) {
    return read_rows<RelationSample>(path, [](const json& doc) {
        RelationSample row;
        row.endpoint_a = doc.at("endpoint_a").get<std::string>();
        row.endpoint_b = doc.at("endpoint_b").get<std::string>();
        const std::string kind = doc.at("class").get<std::string>();
        require(kind == "subject_subject" || kind == "object_object", Errc::parse_error,
                "bad relation class");
        row.kind = kind == "subject_subject" ? graph::RelationClass::SubjectSubject
                                             : graph::RelationClass::ObjectObject;
        row.w_forward = doc.at("w_forward").get<double>();
        row.w_backward = doc.at("w_backward").get<double>();
        const auto f = doc.at("features").get<std::vector<double>>();
        require(f.size() == row.features.size(), Errc::parse_error, "bad feature arity");
        std::copy(f.begin(), f.end(), row.features.begin());
        return row;
    });
}

}  // namespace graynet::io
