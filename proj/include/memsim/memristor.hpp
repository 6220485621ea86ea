#pragma once

#include <cmath>

#include "memsim/errors.hpp"

namespace memsim {

/// Device constants of the linear-drift TiO2 memristor. Resistances in
/// ohms, film thickness in meters, dopant mobility in m^2/(V*s).
struct MemristorParams {
    double r_on = 100.0;
    double r_off = 16e3;
    double d = 10e-9;
    double mu_v = 10e-15;
    int p = 10;              // window sharpness
    double r_init = 1e3;

    /// State-equation gain k = mu_v * r_on / d^2, in 1/(A*s).
    double k() const { return mu_v * r_on / (d * d); }

    /// Effective window exponent. The executable device model uses an even
    /// exponent 2p; a nonzero override replaces it for experimentation.
    int exponent_override = 0;
    int window_exponent() const { return exponent_override > 0 ? exponent_override : 2 * p; }

    /// Throws ConfigError unless 0 < r_on < r_off, r_on <= r_init <= r_off,
    /// d > 0, mu_v > 0 and p >= 1.
    void validate() const;
};

/// The single internal state: doped-region width as a fraction of the film,
/// confined to [0, 1].
struct MemristorState {
    double x = 0.0;
};

/// How integrate_state_step discretizes the state equation.
enum class StateMethod { ExplicitEuler, Implicit };

/// Terminal resistance r_off - (r_off - r_on) * x. Throws std::domain_error
/// when x lies outside [0, 1] by more than a small clamp tolerance.
double memristance(double x, const MemristorParams& params);

/// Dopant-drift window 1 - (2x - 1)^e with even exponent e. Total on all
/// of R; zero at x = 0 and x = 1, peak 1 at x = 1/2.
double window(double x, int p);

/// d/dx of window(x, p).
double window_derivative(double x, int p);

/// dx/dt = k * i * window(x). Positive current into the marked terminal
/// raises x and therefore lowers the memristance.
double state_derivative(double x, double i, const MemristorParams& params);

/// Inverse of memristance: (r_off - r) / (r_off - r_on). Throws
/// std::range_error when r lies outside [r_on, r_off].
double x_from_resistance(double r, const MemristorParams& params);

/// Advance the state one step under constant terminal current, clamped to
/// [0, 1]. The implicit method solves the backward-Euler equation with a
/// guarded scalar Newton and throws ConvergenceError if it stalls, which
/// callers treat as a request to cut the step size.
double integrate_state_step(double x, double i, double dt, const MemristorParams& params,
                            StateMethod method);

namespace detail {

/// memristance without the domain check, defined for all real x. Used by
/// solver internals that may probe slightly outside [0, 1] mid-iteration.
inline double memristance_unchecked(double x, const MemristorParams& p) {
    return p.r_off - (p.r_off - p.r_on) * x;
}

/// Integer power by squaring, sign-correct for negative bases.
inline double ipow(double base, int e) {
    double r = 1.0, b = base;
    for (int n = e; n > 0; n >>= 1) {
        if (n & 1) r *= b;
        b *= b;
    }
    return r;
}

inline double window_exp(double x, int exponent) {
    return 1.0 - ipow(2.0 * x - 1.0, exponent);
}

inline double window_exp_derivative(double x, int exponent) {
    return -2.0 * exponent * ipow(2.0 * x - 1.0, exponent - 1);
}

} // namespace detail

} // namespace memsim
