#pragma once

#include <stdexcept>
#include <string>

namespace superlse {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
public:
    explicit NotPositiveDefinite(const std::string& what)
        : NumericalError("matrix is not positive definite: " + what) {}
};

class LineSearchFailed : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Malformed input.
class InputError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InputError {
public:
    using InputError::InputError;
};

class InvalidPattern : public InputError {
public:
    using InputError::InputError;
};

class InvalidFrequency : public InputError {
public:
    using InputError::InputError;
};

class NoActiveComponents : public InputError {
public:
    NoActiveComponents() : InputError("operation requires at least one active component") {}
};

class InfeasibleSeparation : public InputError {
public:
    using InputError::InputError;
};

}  // namespace superlse
