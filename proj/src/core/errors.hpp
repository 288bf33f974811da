#pragma once

#include <stdexcept>
#include <string>

namespace cpkit {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad shapes, modes out of range, malformed configuration values.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A symmetric factorization failed even after jitter; the system is
// numerically singular. Callers may retry with larger regularization.
class SingularSystem : public Error {
public:
    using Error::Error;
};

// Non-finite values appeared in an iterate (divergence).
class NumericalFailure : public Error {
public:
    using Error::Error;
};

// A configured size cap (element count, variable count) was exceeded.
class LimitExceeded : public Error {
public:
    using Error::Error;
};

// File read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed config or file contents.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace cpkit
