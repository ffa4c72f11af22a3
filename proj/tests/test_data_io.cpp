#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "graynet/data_io.hpp"
#include "graynet/det_rng.hpp"

using namespace graynet;
using namespace graynet::io;

namespace {

// Hand-assembled little-endian capture: global header + one 4-byte record.
std::vector<std::uint8_t> crafted_little_endian() {
    std::vector<std::uint8_t> bytes = {
        0xD4, 0xC3, 0xB2, 0xA1,  // magic, written little-endian
        0x02, 0x00, 0x04, 0x00,  // version 2.4
        0x00, 0x00, 0x00, 0x00,  // thiszone
        0x00, 0x00, 0x00, 0x00,  // sigfigs
        0xFF, 0xFF, 0x00, 0x00,  // snaplen 65535
        0x01, 0x00, 0x00, 0x00,  // network
        0x0A, 0x00, 0x00, 0x00,  // ts_sec = 10
        0x20, 0xA1, 0x07, 0x00,  // ts_usec = 500000
        0x04, 0x00, 0x00, 0x00,  // incl_len = 4
        0x04, 0x00, 0x00, 0x00,  // orig_len = 4
        'A', 'B', 'C', 'D',
    };
    return bytes;
}

bool contains_motif(const FlowRecord& flow) {
    for (const auto& packet : flow.packets) {
        for (std::size_t i = 0; i + kAnomalyMotif.size() <= packet.size(); ++i) {
            if (std::equal(kAnomalyMotif.begin(), kAnomalyMotif.end(), packet.begin() + i)) {
                return true;
            }
        }
    }
    return false;
}

SynthSpec small_spec() {
    SynthSpec spec;
    spec.n_flows = 200;
    spec.anomaly_fraction = 0.2;
    spec.n_clients = 3;
    spec.skew = 0.5;
    spec.seed = 11;
    spec.packet_len_range = {8, 24};
    spec.packets_per_flow_range = {1, 4};
    return spec;
}

std::map<Label, std::size_t> label_histogram(const std::vector<FlowRecord>& flows) {
    std::map<Label, std::size_t> hist;
    for (const FlowRecord& f : flows) ++hist[f.label];
    return hist;
}

}  // namespace

TEST_SUITE("data_io") {

TEST_CASE("read_capture: header-only file has zero packets") {
    CaptureFile empty;
    empty.byte_order = ByteOrder::Little;
    const auto bytes = write_capture(empty);
    CHECK(bytes.size() == 24);
    CHECK(read_capture(bytes).packets.empty());
}

TEST_CASE("read_capture: hand-crafted little-endian record") {
    const CaptureFile capture = read_capture(crafted_little_endian());
    CHECK(capture.byte_order == ByteOrder::Little);
    REQUIRE(capture.packets.size() == 1);
    CHECK(capture.packets[0].ts_sec == 10);
    CHECK(capture.packets[0].ts_usec == 500000);
    CHECK(capture.packets[0].data == std::vector<std::uint8_t>{'A', 'B', 'C', 'D'});
    CHECK(capture.packets[0].timestamp() == doctest::Approx(10.5));
}

TEST_CASE("read_capture round-trips both byte orders") {
    for (ByteOrder order : {ByteOrder::Little, ByteOrder::Big}) {
        CaptureFile original;
        original.byte_order = order;
        original.snaplen = 4096;
        original.network = 1;
        Rng rng(order == ByteOrder::Big ? 7 : 8);
        for (int i = 0; i < 5; ++i) {
            CapturePacket p;
            p.ts_sec = static_cast<std::uint32_t>(rng.index(1000));
            p.ts_usec = static_cast<std::uint32_t>(rng.index(1000000));
            p.data.resize(1 + rng.index(40));
            for (auto& b : p.data) b = static_cast<std::uint8_t>(rng.index(256));
            p.orig_len = static_cast<std::uint32_t>(p.data.size() + rng.index(10));
            original.packets.push_back(std::move(p));
        }
        const CaptureFile back = read_capture(write_capture(original));
        CHECK(back.byte_order == order);
        CHECK(back.snaplen == original.snaplen);
        REQUIRE(back.packets.size() == original.packets.size());
        for (std::size_t i = 0; i < back.packets.size(); ++i) {
            CHECK(back.packets[i].ts_sec == original.packets[i].ts_sec);
            CHECK(back.packets[i].ts_usec == original.packets[i].ts_usec);
            CHECK(back.packets[i].orig_len == original.packets[i].orig_len);
            CHECK(back.packets[i].data == original.packets[i].data);
        }
    }
}

TEST_CASE("read_capture: bad magic") {
    std::vector<std::uint8_t> bytes = crafted_little_endian();
    bytes[0] = 0x00;
    try {
        read_capture(bytes);
        FAIL("expected BadMagic");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::bad_magic);
    }
}

TEST_CASE("read_capture: truncation mid-payload and mid-header") {
    auto bytes = crafted_little_endian();
    bytes.resize(bytes.size() - 2);  // cut into the payload
    try {
        read_capture(bytes);
        FAIL("expected TruncatedRecord");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::truncated_record);
    }
    auto short_header = crafted_little_endian();
    short_header.resize(24 + 7);  // cut into the record header
    CHECK_THROWS_AS(read_capture(short_header), Error);
}

TEST_CASE("read_capture: captured length above original length") {
    auto bytes = crafted_little_endian();
    bytes[36] = 0x02;  // orig_len = 2 < incl_len = 4
    try {
        read_capture(bytes);
        FAIL("expected LengthOverflow");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::length_overflow);
    }
}

TEST_CASE("capture_to_flows groups by inter-packet gap") {
    CaptureFile capture;
    auto packet_at = [](std::uint32_t sec) {
        CapturePacket p;
        p.ts_sec = sec;
        p.data = {0x01};
        p.orig_len = 1;
        return p;
    };
    capture.packets = {packet_at(0), packet_at(1), packet_at(2)};
    CHECK(capture_to_flows(capture, 5.0).size() == 1);
    capture.packets = {packet_at(0), packet_at(10)};
    const auto flows = capture_to_flows(capture, 5.0);
    CHECK(flows.size() == 2);
    CHECK(flows[0].label == Label::Unlabeled);
    CHECK(capture_to_flows(CaptureFile{}, 5.0).empty());
}

TEST_CASE("synthesize: anomaly_fraction zero means all normal") {
    SynthSpec spec = small_spec();
    spec.anomaly_fraction = 0.0;
    const SynthData data = synthesize(spec);
    for (const FlowRecord& f : data.d_g) CHECK(f.label == Label::Normal);
    for (const auto& client : data.d_ps) {
        for (const FlowRecord& f : client) CHECK(f.label == Label::Normal);
    }
}

TEST_CASE("synthesize: exact anomaly count across the public and private pools") {
    SynthSpec spec = small_spec();
    spec.n_flows = 1000;
    spec.anomaly_fraction = 0.1;
    const SynthData data = synthesize(spec);
    std::size_t anomalies = 0;
    std::size_t total = data.d_g.size();
    for (const FlowRecord& f : data.d_g) anomalies += f.label == Label::Anomaly;
    for (const auto& client : data.d_ps) {
        total += client.size();
        for (const FlowRecord& f : client) anomalies += f.label == Label::Anomaly;
    }
    CHECK(total == 1000);
    CHECK(anomalies == 100);
}

TEST_CASE("synthesize is a pure function of its spec") {
    const SynthData a = synthesize(small_spec());
    const SynthData b = synthesize(small_spec());
    REQUIRE(a.d_g.size() == b.d_g.size());
    for (std::size_t i = 0; i < a.d_g.size(); ++i) {
        CHECK(a.d_g[i].flow_id == b.d_g[i].flow_id);
        CHECK(a.d_g[i].packets == b.d_g[i].packets);
        CHECK(a.d_g[i].label == b.d_g[i].label);
    }
    REQUIRE(a.d_ps.size() == b.d_ps.size());
    for (std::size_t c = 0; c < a.d_ps.size(); ++c) {
        REQUIRE(a.d_ps[c].size() == b.d_ps[c].size());
        for (std::size_t i = 0; i < a.d_ps[c].size(); ++i) {
            CHECK(a.d_ps[c][i].packets == b.d_ps[c][i].packets);
        }
    }
    CHECK(a.d_a.size() == b.d_a.size());
    CHECK(a.d_r.size() == b.d_r.size());
}

TEST_CASE("synthesize: private pools are disjoint and cover the non-public flows") {
    const SynthData data = synthesize(small_spec());
    std::set<std::string> seen;
    std::size_t private_total = 0;
    for (const auto& client : data.d_ps) {
        private_total += client.size();
        for (const FlowRecord& f : client) CHECK(seen.insert(f.flow_id).second);
    }
    for (const FlowRecord& f : data.d_g) CHECK(seen.count(f.flow_id) == 0);
    CHECK(private_total + data.d_g.size() == small_spec().n_flows);
}

TEST_CASE("synthesize: the motif marks exactly the anomaly flows") {
    const SynthData data = synthesize(small_spec());
    auto scan = [&](const FlowRecord& f) {
        if (f.label == Label::Anomaly) {
            CHECK(contains_motif(f));
        } else {
            CHECK_FALSE(contains_motif(f));
        }
    };
    for (const FlowRecord& f : data.d_g) scan(f);
    for (const auto& client : data.d_ps) {
        for (const FlowRecord& f : client) scan(f);
    }
}

TEST_CASE("synthesize: smaller skew concentrates labels harder") {
    // Total-variation distance between each client's label mix and the
    // global mix, averaged over clients, should shrink as skew grows.
    auto mean_tv = [](const SynthSpec& spec) {
        const SynthData data = synthesize(spec);
        std::size_t total = 0, anomalies = 0;
        for (const auto& client : data.d_ps) {
            total += client.size();
            for (const FlowRecord& f : client) anomalies += f.label == Label::Anomaly;
        }
        const double global_frac = double(anomalies) / double(total);
        double tv = 0.0;
        std::size_t counted = 0;
        for (const auto& client : data.d_ps) {
            if (client.empty()) continue;
            std::size_t a = 0;
            for (const FlowRecord& f : client) a += f.label == Label::Anomaly;
            tv += std::fabs(double(a) / double(client.size()) - global_frac);
            ++counted;
        }
        return tv / double(counted);
    };
    SynthSpec sharp = small_spec();
    sharp.n_flows = 2000;
    sharp.skew = 0.05;
    SynthSpec mild = sharp;
    mild.skew = 50.0;
    CHECK(mean_tv(sharp) > mean_tv(mild));
}

TEST_CASE("synthesize validates its spec") {
    SynthSpec bad = small_spec();
    bad.anomaly_fraction = 1.5;
    CHECK_THROWS_AS(synthesize(bad), Error);
    bad = small_spec();
    bad.packet_len_range = {4, 2};
    CHECK_THROWS_AS(synthesize(bad), Error);
}

TEST_CASE("hex codec endpoints") {
    CHECK(hex_encode(std::vector<std::uint8_t>{0x00, 0xFF}) == "00ff");
    CHECK(hex_decode("00ff") == std::vector<std::uint8_t>{0x00, 0xFF});
    CHECK_THROWS_AS(hex_decode("0"), Error);
    CHECK_THROWS_AS(hex_decode("zz"), Error);
}

TEST_CASE("flow files: empty list round-trips to an empty list") {
    std::stringstream stream;
    write_flows(stream, std::vector<FlowRecord>{});
    CHECK(stream.str().empty());
    CHECK(read_flows(stream).empty());
}

TEST_CASE("flow files: single record with the 00ff packet") {
    FlowRecord flow;
    flow.flow_id = "f1";
    flow.label = Label::Anomaly;
    flow.packets = {{0x00, 0xFF}};
    flow.attributes["owner"] = "client-1";
    std::stringstream stream;
    write_flows(stream, std::vector<FlowRecord>{flow});
    CHECK(stream.str().find("00ff") != std::string::npos);
    const auto back = read_flows(stream);
    REQUIRE(back.size() == 1);
    CHECK(back[0].flow_id == "f1");
    CHECK(back[0].label == Label::Anomaly);
    CHECK(back[0].packets == flow.packets);
    CHECK(back[0].attributes.at("owner") == "client-1");
}

TEST_CASE("flow files: 1000 random flows are byte-identical after two trips") {
    Rng rng(4242);
    std::vector<FlowRecord> flows;
    for (int i = 0; i < 1000; ++i) {
        FlowRecord f;
        f.flow_id = "flow-" + std::to_string(i);
        f.label = rng.index(3) == 0 ? Label::Anomaly
                                    : (rng.index(2) == 0 ? Label::Normal : Label::Unlabeled);
        const std::size_t packets = 1 + rng.index(5);
        for (std::size_t p = 0; p < packets; ++p) {
            std::vector<std::uint8_t> bytes(1 + rng.index(60));
            for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.index(256));
            f.packets.push_back(std::move(bytes));
        }
        if (rng.index(2) == 0) f.attributes["k" + std::to_string(i % 7)] = "v";
        flows.push_back(std::move(f));
    }
    std::stringstream first;
    write_flows(first, flows);
    const std::string once = first.str();
    const auto parsed = read_flows(first);
    std::stringstream second;
    write_flows(second, parsed);
    CHECK(second.str() == once);
}

TEST_CASE("flow files: parse errors carry the line number") {
    std::stringstream stream("{\"flow_id\":\"a\",\"label\":\"normal\",\"packets\":[],"
                             "\"attributes\":{}}\nnot json\n");
    try {
        read_flows(stream);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

}  // TEST_SUITE
