#pragma once

#include <stdexcept>
#include <string>

namespace capd {

/// Base for every error raised by the library. Subclasses map onto the CLI
/// exit-code contract (config = 2, data = 3, numeric = 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Raised by the model file reader.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class UnsupportedVersion : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace capd
