#pragma once

#include <stdexcept>
#include <string>

namespace vwapforge {

// Base of every error thrown by the library. The CLI maps ConfigError to
// exit code 1 and the rest to 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

// Raised for windows whose horizon carries no market volume (VWAP undefined).
class DegenerateWindow : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace vwapforge
