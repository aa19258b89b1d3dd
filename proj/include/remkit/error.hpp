#pragma once

#include <stdexcept>
#include <string>

namespace remkit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unknown or invalid configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A required input file does not exist or cannot be opened.
class MissingFileError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (bad magic, truncation, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

/// NaN / Inf encountered in a gradient or parameter.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace remkit
