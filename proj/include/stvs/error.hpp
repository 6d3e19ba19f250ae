#pragma once

#include <stdexcept>
#include <string>

namespace stvs {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class MissingLabelError : public Error {
public:
    using Error::Error;
};

class ConstraintError : public Error {
public:
    using Error::Error;
};

class InsufficientSeedsError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class EmptyClusterError : public Error {
public:
    using Error::Error;
};

class DegenerateLabelsError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

/// Raised when precision or recall has a zero denominator.
class UndefinedMetricError : public Error {
public:
    enum class Denominator { PredictedPositive, ActualPositive, ActualNegative };

    UndefinedMetricError(Denominator which, const std::string& what)
        : Error(what), which_(which) {}

    Denominator which() const noexcept { return which_; }

private:
    Denominator which_;
};

}  // namespace stvs
