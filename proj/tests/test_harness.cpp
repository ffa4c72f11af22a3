#include <doctest.h>

#include <regex>

#include "graynet/harness.hpp"

using namespace graynet;
using namespace graynet::harness;

namespace {

// Smallest configuration that exercises the full path quickly.
SweepSpec tiny_spec() {
    SweepSpec spec;
    spec.axis = Axis::EmbedDim;
    spec.values = {4};
    spec.folds = 2;

    spec.base.synth.n_flows = 80;
    spec.base.synth.anomaly_fraction = 0.25;
    spec.base.synth.n_clients = 2;
    spec.base.synth.skew = 1.0;
    spec.base.synth.seed = 5;
    spec.base.synth.packet_len_range = {8, 16};
    spec.base.synth.packets_per_flow_range = {1, 2};
    spec.base.synth.public_fraction = 0.5;

    spec.base.federation.n_clients = 2;
    spec.base.federation.rounds = 1;
    spec.base.federation.selection_seed = 6;

    spec.base.train.learning_rate = 0.05;
    spec.base.train.batch_size = 16;
    spec.base.train.max_epochs = 2;
    spec.base.train.patience = 2;
    spec.base.train.hidden_width = 6;
    spec.base.train.seed = 7;

    spec.base.hyper.embed_dim = 4;
    spec.base.hyper.packet_len = 8;
    spec.base.hyper.max_packets = 2;
    spec.base.hyper.support_size = 16;
    spec.base.hyper.extract_depth = 1;

    spec.base.error.lambda = {0.0};
    spec.base.parallel = true;
    return spec;
}

std::vector<double> numbers_in(const std::string& text) {
    std::vector<double> out;
    const std::regex number(R"([-+]?[0-9]+(\.[0-9]+)?)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), number);
         it != std::sregex_iterator(); ++it) {
        out.push_back(std::stod(it->str()));
    }
    return out;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("axis names parse and reject unknowns") {
    CHECK(parse_axis("embed_dim") == Axis::EmbedDim);
    CHECK(parse_axis("extract_depth") == Axis::ExtractDepth);
    CHECK(parse_axis("support_size") == Axis::SupportSize);
    CHECK_THROWS_AS(parse_axis("depth"), Error);
}

TEST_CASE("validate rejects empty or unsorted value lists") {
    SweepSpec spec = tiny_spec();
    spec.values = {};
    CHECK_THROWS_AS(validate(spec), Error);
    spec.values = {32, 16};
    CHECK_THROWS_AS(validate(spec), Error);
}

TEST_CASE("single-point sweep yields one finite row") {
    const SweepResult result = run_sweep(tiny_spec());
    REQUIRE(result.rows.size() == 1);
    const SweepRow& row = result.rows[0];
    CHECK(row.value == 4);
    CHECK(row.mean_ge >= 0.0);
    CHECK(row.mean_ge <= 1.0);
    CHECK(row.sd_ge >= 0.0);
    CHECK(row.federation_runs == 2);  // one per fold
    CHECK(row.fold_ge.size() == 2);
    CHECK(result.folds.size() == 2);
    for (const FoldOutcome& fold : result.folds) {
        CHECK(!fold.rounds.empty());
        CHECK(fold.sim_seconds > 0.0);
    }
}

TEST_CASE("sweeps echo the axis values in order") {
    SweepSpec spec = tiny_spec();
    spec.axis = Axis::SupportSize;
    spec.values = {8, 16};
    spec.folds = 1;
    spec.base.federation.rounds = 0;
    const SweepResult result = run_sweep(spec);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].value == 8);
    CHECK(result.rows[1].value == 16);
    CHECK(result.axis == Axis::SupportSize);
}

TEST_CASE("identical specs give identical tables") {
    const SweepResult a = run_sweep(tiny_spec());
    const SweepResult b = run_sweep(tiny_spec());
    CHECK(emit_table(a, TableFormat::Csv) == emit_table(b, TableFormat::Csv));
    CHECK(emit_table(a, TableFormat::Markdown) == emit_table(b, TableFormat::Markdown));
}

TEST_CASE("emit_table renders percentages with three decimals") {
    SweepResult result;
    result.axis = Axis::EmbedDim;
    SweepRow row;
    row.value = 16;
    row.mean_ge = 0.00063;
    row.sd_ge = 0.0;
    row.control_ge = 0.25;
    row.sim_seconds = 1.5;
    result.rows.push_back(row);
    const std::string csv = emit_table(result, TableFormat::Csv);
    CHECK(csv.find("0.063%") != std::string::npos);
    CHECK(csv.find("0.000%") != std::string::npos);
    CHECK(csv.find("25.000%") != std::string::npos);
    CHECK(csv.rfind("embed_dim,", 0) == 0);
}

TEST_CASE("emit_table: zero renders as 0.000%") {
    SweepResult result;
    result.axis = Axis::ExtractDepth;
    SweepRow row;
    row.value = 3;
    result.rows.push_back(row);
    CHECK(emit_table(result, TableFormat::Csv).find("0.000%") != std::string::npos);
}

TEST_CASE("csv and markdown tables carry identical numeric content") {
    const SweepResult result = run_sweep(tiny_spec());
    const auto csv_numbers = numbers_in(emit_table(result, TableFormat::Csv));
    const auto md_numbers = numbers_in(emit_table(result, TableFormat::Markdown));
    CHECK(csv_numbers == md_numbers);
}

TEST_CASE("emit_table rejects empty results") {
    CHECK_THROWS_AS(emit_table(SweepResult{}, TableFormat::Csv), Error);
}

}  // TEST_SUITE
