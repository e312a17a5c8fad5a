#pragma once

#include <stdexcept>
#include <string>

namespace freeflow {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on an argument or a type invariant was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

// An iterative or time-stepping routine failed (non-convergence, particle
// collision, eigen-decomposition failure).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace freeflow
