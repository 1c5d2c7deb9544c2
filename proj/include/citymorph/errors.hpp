#pragma once

#include <stdexcept>
#include <string>

namespace citymorph {

// Maps to CLI exit code 1.
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Tensor/grid dimension mismatches.
struct ShapeError : ArgumentError {
    explicit ShapeError(const std::string& msg) : ArgumentError(msg) {}
};

// Bad files, missing channels, empty pipelines. Maps to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss etc. Maps to exit code 3; the last good checkpoint is kept.
struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace citymorph
