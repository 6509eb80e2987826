#pragma once

#include <stdexcept>
#include <string>

namespace svl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Argument outside an admissible interval (times, probabilities, f_beta).
class RangeError : public Error
{
  public:
    using Error::Error;
};

// Vector or matrix dimensions disagree.
class ShapeError : public Error
{
  public:
    using Error::Error;
};

// A formula hits a zero denominator at the requested time.
class SingularityError : public Error
{
  public:
    using Error::Error;
};

// Steps must move strictly backward in time.
class TimeOrderError : public Error
{
  public:
    using Error::Error;
};

class ConfigError : public Error
{
  public:
    using Error::Error;
};

// Non-finite values in data or targets, or malformed input files.
class DataError : public Error
{
  public:
    using Error::Error;
};

// Non-finite values produced during a computation (loss, target).
class NumericError : public DataError
{
  public:
    using DataError::DataError;
};

class IoError : public Error
{
  public:
    using Error::Error;
};

class LabelError : public Error
{
  public:
    using Error::Error;
};

class InsufficientDataError : public Error
{
  public:
    using Error::Error;
};

class NotPrefilledError : public Error
{
  public:
    using Error::Error;
};

// A split point cannot be defined on a curve that is identically zero.
class UndefinedSplitError : public Error
{
  public:
    using Error::Error;
};

class InvariantError : public Error
{
  public:
    using Error::Error;
};

}  // namespace svl
