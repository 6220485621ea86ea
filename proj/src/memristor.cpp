#include "memsim/memristor.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace memsim {

namespace {
constexpr double kClampTol = 1e-9;
} // namespace

void MemristorParams::validate() const {
    if (!(r_on > 0.0) || !(r_on < r_off))
        throw ConfigError("memristor params: need 0 < r_on < r_off");
    if (!(r_init >= r_on) || !(r_init <= r_off))
        throw ConfigError("memristor params: r_init must lie in [r_on, r_off]");
    if (!(d > 0.0)) throw ConfigError("memristor params: d must be positive");
    if (!(mu_v > 0.0)) throw ConfigError("memristor params: mu_v must be positive");
    if (p < 1) throw ConfigError("memristor params: p must be >= 1");
}

double memristance(double x, const MemristorParams& params) {
    if (x < -kClampTol || x > 1.0 + kClampTol)
        throw std::domain_error("memristance: state x = " + std::to_string(x) +
                                " outside [0, 1]");
    x = std::clamp(x, 0.0, 1.0);
    return detail::memristance_unchecked(x, params);
}

double window(double x, int p) {
    return detail::window_exp(x, 2 * p);
}

double window_derivative(double x, int p) {
    return detail::window_exp_derivative(x, 2 * p);
}

double state_derivative(double x, double i, const MemristorParams& params) {
    return params.k() * i * detail::window_exp(x, params.window_exponent());
}

double x_from_resistance(double r, const MemristorParams& params) {
    if (r < params.r_on - kClampTol * params.r_on || r > params.r_off + kClampTol * params.r_off)
        throw std::range_error("x_from_resistance: r = " + std::to_string(r) +
                               " outside [r_on, r_off]");
    double x = (params.r_off - r) / (params.r_off - params.r_on);
    return std::clamp(x, 0.0, 1.0);
}

double integrate_state_step(double x, double i, double dt, const MemristorParams& params,
                            StateMethod method) {
    if (!(dt > 0.0)) throw ConfigError("integrate_state_step: dt must be positive");
    const int e = params.window_exponent();
    const double ki = params.k() * i;

    if (method == StateMethod::ExplicitEuler)
        return std::clamp(x + dt * ki * detail::window_exp(x, e), 0.0, 1.0);

    // Backward Euler: solve  x1 - x - dt*k*i*window(x1) = 0  by guarded Newton.
    double lo = 0.0, hi = 1.0;
    auto residual = [&](double x1) { return x1 - x - dt * ki * detail::window_exp(x1, e); };
    // The residual is monotone-bracketed on [0, 1]: window >= 0 there.
    if (residual(lo) > 0.0) return 0.0; // drive pushes below the lower rail
    if (residual(hi) < 0.0) return 1.0; // drive pushes past the upper rail

    double x1 = std::clamp(x, 0.0, 1.0);
    for (int iter = 0; iter < 128; ++iter) {
        double f = residual(x1);
        if (std::abs(f) < 1e-14 || hi - lo < 8.0 * std::numeric_limits<double>::epsilon())
            return std::clamp(x1, 0.0, 1.0);
        if (f > 0.0) hi = x1; else lo = x1;
        double fp = 1.0 - dt * ki * detail::window_exp_derivative(x1, e);
        double next = (fp != 0.0) ? x1 - f / fp : x1;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi); // bisect when Newton leaves the bracket
        x1 = next;
    }
    throw ConvergenceError("integrate_state_step: implicit state update stalled; reduce dt");
}

} // namespace memsim
