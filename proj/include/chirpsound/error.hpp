#pragma once

#include <stdexcept>
#include <string>

namespace chirpsound {

// Base for every error raised by the library. The CLI maps each subclass
// onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A waveform design inequality or a precondition on (p, N) does not hold.
class ConstraintError : public Error {
public:
    using Error::Error;
};

// Malformed input: bad config values, out-of-range parameters.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Vector/matrix sizes that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Ill-conditioned solves and similar numerical breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace chirpsound
