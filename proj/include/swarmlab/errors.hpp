#pragma once

#include <stdexcept>
#include <string>

namespace swarmlab {

// Malformed inputs: shape mismatches, invalid ranges, empty sets.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad configuration files or CLI arguments (exit code 2).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or other numeric breakdowns (exit code 3).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation at a pole (zero displacement, zero direction vector).
struct singularity_error : numeric_error {
    using numeric_error::numeric_error;
};

// Rejection sampling or scenario construction ran out of budget.
struct generation_error : numeric_error {
    generation_error(const std::string& what, long attempts)
        : numeric_error(what + " after " + std::to_string(attempts) + " attempts"),
          attempts(attempts) {}
    long attempts;
};

}  // namespace swarmlab
