#include "memsim/opamp.hpp"

#include <algorithm>

namespace memsim {

double opamp_output(double v_plus, double v_minus, const OpAmpModel& model) {
    double v = model.open_loop_gain * (v_plus - v_minus);
    return std::clamp(v, -model.v_sat, model.v_sat);
}

double opamp_output_derivative(double v_plus, double v_minus, const OpAmpModel& model) {
    double v = model.open_loop_gain * (v_plus - v_minus);
    return (v <= -model.v_sat || v >= model.v_sat) ? 0.0 : model.open_loop_gain;
}

} // namespace memsim
