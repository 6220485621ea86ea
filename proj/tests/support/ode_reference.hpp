#pragma once

// Test-only adaptive Cash-Karp RK4(5) for scalar ODEs. Used as the
// independent reference the engine's state trajectories are checked
// against; keep it free of any solver code from the library.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace memsim::testing {

struct Rk45Options {
    double rtol = 1e-10;
    double atol = 1e-13;
    double h_init = 1e-7;
    long max_steps = 50'000'000;
};

/// Integrate dx/dt = f(t, x) from (t0, x0) to t1.
inline double integrate_scalar(const std::function<double(double, double)>& f, double t0,
                               double x0, double t1, Rk45Options opt = {}) {
    static constexpr double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;
    static constexpr double b21 = 1.0 / 5;
    static constexpr double b31 = 3.0 / 40, b32 = 9.0 / 40;
    static constexpr double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
    static constexpr double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
    static constexpr double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824,
                            b64 = 44275.0 / 110592, b65 = 253.0 / 4096;
    static constexpr double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594,
                            c6 = 512.0 / 1771;
    static constexpr double d1 = c1 - 2825.0 / 27648, d3 = c3 - 18575.0 / 48384,
                            d4 = c4 - 13525.0 / 55296, d5 = -277.0 / 14336,
                            d6 = c6 - 1.0 / 4;

    if (t1 == t0) return x0;
    if (t1 < t0) throw std::invalid_argument("integrate_scalar: t1 < t0");

    double t = t0, x = x0;
    double h = std::min(opt.h_init, t1 - t0);
    for (long n = 0; n < opt.max_steps; ++n) {
        if (t >= t1) return x;
        h = std::min(h, t1 - t);

        double k1 = f(t, x);
        double k2 = f(t + a2 * h, x + h * b21 * k1);
        double k3 = f(t + a3 * h, x + h * (b31 * k1 + b32 * k2));
        double k4 = f(t + a4 * h, x + h * (b41 * k1 + b42 * k2 + b43 * k3));
        double k5 = f(t + a5 * h, x + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
        double k6 = f(t + a6 * h, x + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));

        double x5 = x + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
        double err = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6);
        double scale = opt.atol + opt.rtol * std::max(std::abs(x), std::abs(x5));
        double ratio = std::abs(err) / scale;

        if (ratio <= 1.0) {
            t += h;
            x = x5;
            double grow = ratio > 0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
            h *= std::min(5.0, std::max(1.0, grow));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(ratio, -0.25));
        }
        if (!(h > 0.0) || !std::isfinite(x))
            throw std::runtime_error("integrate_scalar: step size underflow");
    }
    throw std::runtime_error("integrate_scalar: too many steps");
}

} // namespace memsim::testing
