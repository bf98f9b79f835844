#pragma once

#include <stdexcept>
#include <string>

namespace ahocda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed data: non-finite values, shape mismatches, out-of-range labels.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A scalar argument outside its documented domain (beta, K, stage index...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// An object used before it reached the required state.
class StateError : public Error {
public:
    using Error::Error;
};

/// Non-finite losses or divergence during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

/// File-system failures. The message always names the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ahocda
