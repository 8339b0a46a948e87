#pragma once

#include <stdexcept>
#include <string>

namespace sonofield {

/// Invalid arguments or preconditions supplied by the caller (CLI exit 1).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (CLI exit 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values, singular kernels, failed numerics (CLI exit 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Warnings go to stderr unless silenced (tests silence them).
void set_warnings_enabled(bool enabled);
void warn(const std::string& message);

}  // namespace sonofield
