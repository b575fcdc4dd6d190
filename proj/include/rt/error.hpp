#pragma once

#include <stdexcept>
#include <string>

namespace rt {

// Shape/dimension violations; messages name the offending shapes.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Domain violations: degenerate softmax rows, zero-denominator metrics,
// non-finite features, malformed permutations.
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Task generators: infeasible specs, resample exhaustion.
struct GeneratorError : std::runtime_error {
    explicit GeneratorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Serialization: bad magic, truncation, version mismatch.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rt
