#pragma once

#include <stdexcept>
#include <string>

namespace ssblink {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter outside its documented domain (rolloff, rates, sizes).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A signal-processing step that cannot produce a meaningful result for the
/// given input (KK minimum-phase violation, sync failure, RLS divergence).
class SimulationError : public Error {
public:
    using Error::Error;
};

}  // namespace ssblink
