#pragma once

#include <stdexcept>
#include <string>

namespace memsim {

/// Base class for everything this library throws on purpose.
struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Netlist or expression text could not be parsed. Carries a 1-based
/// source position when one is known (0 means "not applicable").
struct ParseError : SimError {
    int line = 0;
    int col = 0;

    ParseError(std::string msg, int line_ = 0, int col_ = 0)
        : SimError(format(msg, line_, col_)), line(line_), col(col_) {}

  private:
    static std::string format(const std::string& msg, int line, int col) {
        if (line <= 0) return msg;
        std::string s = "line " + std::to_string(line);
        if (col > 0) s += ", col " + std::to_string(col);
        return s + ": " + msg;
    }
};

/// A reference (parameter, node voltage, branch current) did not resolve,
/// or an expression could not be evaluated at the given point.
struct EvalError : SimError {
    using SimError::SimError;
};

/// The circuit cannot be turned into a solvable system (bad topology,
/// port arity mismatch, recursive subcircuits, singular structure).
struct AssemblyError : SimError {
    using SimError::SimError;
};

/// An iterative solve gave up. `t` is the simulation time at which the
/// failure happened, or a negative value for DC analyses.
struct ConvergenceError : SimError {
    double t = -1.0;

    explicit ConvergenceError(std::string msg, double t_ = -1.0)
        : SimError(std::move(msg)), t(t_) {}
};

/// Invalid configuration or invocation (bad experiment spec, bad CLI use).
struct ConfigError : SimError {
    using SimError::SimError;
};

} // namespace memsim
