#pragma once

#include <stdexcept>
#include <string>

namespace gridsim {

// Network graph is disconnected or otherwise not a valid feeder tree.
struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A branch with zero series impedance cannot be inverted into the Y-bus.
struct SingularBranchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidNetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularJacobianError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by the DAE stepper when the algebraic network solve fails.
struct StepRejected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Undefined quantity: empty series, zero denominator, ...
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace gridsim
