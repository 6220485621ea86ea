#pragma once

namespace memsim {

/// Behavioral op-amp: finite-gain differential stage hard-clipped at the
/// supply rails, with an optional single-pole output lag.
///
/// pole_freq = 0 disables the lag; the output then follows the clipped
/// differential input instantaneously. A nonzero pole makes the clipped
/// value the target of a first-order lag integrated by the engine.
struct OpAmpModel {
    double open_loop_gain = 2e5;
    double v_sat = 5.0;
    double pole_freq = 0.0; // Hz

    bool has_pole() const { return pole_freq > 0.0; }
};

/// Open-loop pole of an AD711-class part (gain-bandwidth ~4 MHz over a
/// 2e5 open-loop gain). Off by default: on the millisecond scale of the
/// programming loops the real part is effectively instantaneous, and the
/// lagged comparator otherwise hunts around the equilibrium.
inline constexpr double kAd711PoleHz = 20.0;

/// clamp(gain * (v_plus - v_minus), -v_sat, +v_sat).
double opamp_output(double v_plus, double v_minus, const OpAmpModel& model);

/// Derivative of opamp_output with respect to (v_plus - v_minus):
/// gain in the linear region, 0 when clipped.
double opamp_output_derivative(double v_plus, double v_minus, const OpAmpModel& model);

} // namespace memsim
