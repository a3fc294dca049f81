#pragma once

#include <stdexcept>
#include <string>

namespace promptweight {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input file (not valid JSON, missing fields, wrong types).
class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

/// Syntactically valid value that breaks a domain invariant.
class InvariantError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invariant"; }
};

class VersionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "version"; }
};

/// Transport failure, non-200 status, arity mismatch or out-of-range values.
class BackendError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "backend"; }
};

/// Cached backend asked for a (image, prompt, variant) tuple it does not hold.
class UnknownKeyError : public BackendError {
public:
    using BackendError::BackendError;
    const char* kind() const noexcept override { return "unknown_key"; }
};

class ZeroWeightSumError : public Error {
public:
    ZeroWeightSumError() : Error("weight vector sums to zero") {}
    const char* kind() const noexcept override { return "zero_weight_sum"; }
};

/// Inputs that do not fit together (task mismatch, prompt ids that differ).
class MismatchError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "mismatch"; }
};

}  // namespace promptweight
