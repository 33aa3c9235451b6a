#pragma once

#include <stdexcept>
#include <string>

namespace snapgrip {

/// Input or precondition violation. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to converge. Maps to CLI exit code 3.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested quantity does not exist for the given input (e.g. no fold on a
/// monostable path).
class AnalysisError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace snapgrip
