#pragma once

#include <stdexcept>
#include <string>

namespace medusa {

// Shape or layout of an argument does not match what the operation needs.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Scalar argument out of range (negative factor, zero step count, ...).
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Object is in the wrong state for the requested operation.
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Class label outside the valid range.
struct LabelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A sample is missing data required by the training configuration.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric is undefined for the given inputs (empty mask, zero baseline, ...).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loss became NaN/Inf; training aborts with diagnostics.
struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or incompatible checkpoint.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace medusa
