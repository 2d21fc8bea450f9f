#pragma once

#include <stdexcept>
#include <string>

namespace wiredyn {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A vector or matrix does not have the expected dimensions.
struct DimensionError : Error {
    using Error::Error;
};

/// Two interfaces that must match (port-for-port) do not.
struct InterfaceError : Error {
    using Error::Error;
};

/// A wiring diagram failed validation where a valid one is required.
struct ValidationError : Error {
    using Error::Error;
};

/// Numeric failure: non-finite value, singular matrix, bad config.
struct NumericError : Error {
    using Error::Error;
};

} // namespace wiredyn
