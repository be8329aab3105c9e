#pragma once

#include <stdexcept>
#include <string>

namespace xmct {

/// Shapes of two operands (or an operand and its geometry) disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value lies outside the domain an operation accepts (NaN input, negative sigma, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration: bad recipe, schedule range, malformed config field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace xmct
