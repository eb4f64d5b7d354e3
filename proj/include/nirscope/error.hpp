#pragma once

#include <stdexcept>
#include <string>

namespace nirscope {

// Invalid parameters or configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed, inconsistent or missing input data. CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Singular systems, non-finite results. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace nirscope
