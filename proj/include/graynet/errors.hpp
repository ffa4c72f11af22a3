#pragma once

#include <stdexcept>
#include <string>

namespace graynet {

// Every failure mode the library reports. The C API and the CLI map these
// onto stable numeric codes, so the order here is part of the interface.
enum class Errc {
    ok = 0,
    // graph
    duplicate_id,
    dangling_endpoint,
    negative_weight,
    unknown_vertex,
    empty_seed_set,
    nonpositive_granularity,
    // numerics
    dimension_mismatch,
    nonfinite_input,
    empty_batch,
    nonpositive_k,
    // pipeline
    empty_flow,
    nonfinite_value,
    // trainer
    empty_dataset,
    // federation
    too_many_servers,
    shape_mismatch,
    empty_update_set,
    invalid_count,
    // data io
    bad_magic,
    truncated_record,
    length_overflow,
    invalid_spec,
    parse_error,
    io_error,
    // metrics
    missing_class,
    too_few_samples,
};

inline const char* errc_name(Errc code) {
    switch (code) {
        case Errc::ok: return "Ok";
        case Errc::duplicate_id: return "DuplicateId";
        case Errc::dangling_endpoint: return "DanglingEndpoint";
        case Errc::negative_weight: return "NegativeWeight";
        case Errc::unknown_vertex: return "UnknownVertex";
        case Errc::empty_seed_set: return "EmptySeedSet";
        case Errc::nonpositive_granularity: return "NonpositiveGranularity";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::nonfinite_input: return "NonFiniteInput";
        case Errc::empty_batch: return "EmptyBatch";
        case Errc::nonpositive_k: return "NonpositiveK";
        case Errc::empty_flow: return "EmptyFlow";
        case Errc::nonfinite_value: return "NonFiniteValue";
        case Errc::empty_dataset: return "EmptyDataset";
        case Errc::too_many_servers: return "TooManyServers";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::empty_update_set: return "EmptyUpdateSet";
        case Errc::invalid_count: return "InvalidCount";
        case Errc::bad_magic: return "BadMagic";
        case Errc::truncated_record: return "TruncatedRecord";
        case Errc::length_overflow: return "LengthOverflow";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::parse_error: return "ParseError";
        case Errc::io_error: return "IoError";
        case Errc::missing_class: return "MissingClass";
        case Errc::too_few_samples: return "TooFewSamples";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace graynet
