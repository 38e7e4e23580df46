#pragma once

#include <stdexcept>
#include <string>

namespace delayid {

// Invalid model or algorithm parameters (signs, sizes, ranges).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A lookup or evaluation outside the region where a quantity is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Mismatched matrix/vector shapes.
class DimensionError : public std::length_error {
public:
    using std::length_error::length_error;
};

class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Integration produced a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double time)
        : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

// Training hit a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace delayid
