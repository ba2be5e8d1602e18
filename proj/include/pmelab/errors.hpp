#pragma once

#include <stdexcept>
#include <string>

namespace pmelab {

/// A caller broke a documented precondition (domain mismatch, negative input, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative solver did not reach its tolerance.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The admissible-datum generator exhausted its parameter ladder.
class GenerationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace pmelab
