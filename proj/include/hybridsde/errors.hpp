#pragma once

#include <stdexcept>
#include <string>

namespace hsde {

// Input could not be read or parsed (missing file, malformed JSON, bad field).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input is well-formed but violates a model or configuration constraint.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical routine failed to meet its contract (singular system,
// residual above tolerance, unreachable restart atom, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hsde
