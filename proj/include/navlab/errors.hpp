#pragma once

#include <stdexcept>
#include <string>

namespace navlab {

// Error categories map onto CLI exit codes: config 2, numeric 3, determinism 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DeterminismError : std::runtime_error {
    explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace navlab
