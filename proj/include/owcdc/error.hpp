#pragma once

#include <stdexcept>
#include <string>

namespace owcdc {

/// Malformed or out-of-range configuration (scenario, topology, override).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A topology that cannot be served at all, e.g. a node with no ports.
class InfeasibleTopology : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised where a quantity needs nonzero received power.
class NoSignalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfiniteSnrError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace owcdc
