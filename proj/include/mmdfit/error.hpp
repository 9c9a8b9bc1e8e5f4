#pragma once

#include <stdexcept>
#include <string>

namespace mmdfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed data: dimension mismatch, bad CSV cell, response outside the model domain.
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid model or optimizer configuration (unknown ids, missing fixed parameters, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The requested route does not exist for this model/kernel pair (no score, no closed form, ...).
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Objective not finite at the starting point.
class InitializationError : public Error {
public:
    using Error::Error;
};

/// Problem too large for the O(n^2) criterion under the configured budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

} // namespace mmdfit
