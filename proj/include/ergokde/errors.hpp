#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ergokde {

// Precondition or domain violation on an operation input.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to converge or produced garbage.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Path simulation blew up; carries the offending step.
struct SimulationError : std::runtime_error {
    std::size_t step;
    SimulationError(const std::string& what, std::size_t step_index)
        : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"),
          step(step_index) {}
};

// Config parsing/validation failure; carries the offending key.
struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string& key_name, const std::string& message)
        : std::runtime_error(key_name + ": " + message), key(key_name) {}
};

// Experiment produced data too degenerate to summarize (e.g. all-zero occupation).
struct DegenerateDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ergokde
