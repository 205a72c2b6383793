#pragma once

#include <stdexcept>
#include <string>

namespace qkr {

// Base for all library failures; subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidStateError : public Error {
public:
    using Error::Error;
};

// Caller broke a documented precondition (grid mismatch, size limit, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class NoChaoticSeaError : public Error {
public:
    using Error::Error;
};

class InsufficientDecayError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RegimeRefusal : public Error {
public:
    using Error::Error;
};

class ResourceRefusal : public Error {
public:
    ResourceRefusal(const std::string& what, double required_bytes)
        : Error(what), required_bytes_(required_bytes) {}
    double required_bytes() const noexcept { return required_bytes_; }

private:
    double required_bytes_;
};

}  // namespace qkr
