#pragma once

#include <stdexcept>
#include <string>

namespace koopctl {

// Error taxonomy mirrors the CLI exit-code contract:
//   ConfigError -> 1, NumericError -> 2, IoError -> 3.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Synthesis failures, divergence, rank deficiency, solver breakdowns.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace koopctl
