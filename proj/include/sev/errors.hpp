#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sev {

/// Bad caller input: dimension mismatch, invalid parameter, malformed file.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operator evaluation produced non-finite components.
struct OperatorEvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap without meeting tolerance.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double best_residual, int iterations)
        : std::runtime_error(what), best_residual(best_residual), iterations(iterations) {}
    double best_residual;
    int iterations;
};

/// Time stepping left the admissible region (non-finite or huge state).
struct BlowUpError : std::runtime_error {
    BlowUpError(const std::string& what, std::size_t last_finite_step)
        : std::runtime_error(what), last_finite_step(last_finite_step) {}
    std::size_t last_finite_step;
};

/// Picard iteration residual grew repeatedly instead of contracting.
struct PicardDivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace sev
