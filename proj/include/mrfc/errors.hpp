#pragma once

#include <stdexcept>
#include <string>

namespace mrfc {

// Base type for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An assignment whose length or states do not match the network.
struct InvalidAssignmentError : Error {
    using Error::Error;
};

// Exact computation refused because the joint state space exceeds the limit.
struct TooLargeError : Error {
    using Error::Error;
};

// Evidence referencing an unknown variable or an out-of-range state.
struct InvalidEvidenceError : Error {
    using Error::Error;
};

// Malformed serialized document; message names the offending field.
struct ParseError : Error {
    using Error::Error;
};

// CSV header or column-type mismatch; message names the column.
struct SchemaError : Error {
    using Error::Error;
};

// A class with zero instances where per-class statistics are required.
struct DegenerateClassError : Error {
    using Error::Error;
};

// Non-finite objective encountered during optimization.
struct DivergedError : Error {
    using Error::Error;
};

// A class too small to appear on both sides of a split.
struct StratificationError : Error {
    using Error::Error;
};

// Requested minority ratio outside the achievable range.
struct InfeasibleRatioError : Error {
    using Error::Error;
};

// Metric requested on single-class labels.
struct UndefinedMetricError : Error {
    using Error::Error;
};

// Invalid or inconsistent run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace mrfc
