#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "memsim/mna.hpp"

namespace memsim {

/// The canonical HP-memristor subcircuit (ports plus/minus, parameters
/// Ron/Roff/Rinit/D/uv/p). Identical to fixtures/hp_memristor.sp.
std::string_view hp_memristor_model_text();

enum class ExperimentKind { Increase, Decrease };
enum class MemristorRealization { Native, Subckt };

/// Closed-loop resistance-programming experiment: an op-amp drives the
/// memristor/R_ref branch against an R1/R2 reference divider until the
/// memristance matches R_ref.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Increase;
    double r_ref = 2e3;
    double r1 = 1e3;
    double r2 = 1e3;
    double supply = 5.0; // op-amp rail voltage A
    MemristorParams memristor{};
    double opamp_gain = 2e5;
    double opamp_pole_hz = 0.0; // 0 = instantaneous comparator
    MemristorRealization realization = MemristorRealization::Native;
    TransientConfig transient{};

    /// Direction check: the increase loop needs r_ref > r_init, the
    /// decrease loop r_ref < r_init. Throws ConfigError when violated.
    void validate() const;
};

struct ViPoint {
    double i = 0.0; // A, into the marked terminal
    double v = 0.0; // V, marked terminal minus the other
};

struct ExperimentMetrics {
    double final_r = 0.0;
    double settling_time_2pct = -1.0; // s; negative = never settled
    double settling_time_5pct = -1.0;
    bool converged = false;           // |final_r - r_ref| <= 2% of r_ref
    double steady_slope = 0.0;        // terminal V-I slope, ohms
    std::vector<ViPoint> vi_curve;
};

struct ExperimentResult {
    ExperimentSpec spec;
    TraceSet traces;
    // normalized per-run series (shared time grid)
    std::vector<double> time, v1, v2, v3, i_mem, v_mem, x, r_mem;
    ExperimentMetrics metrics;
    std::vector<std::string> warnings;
};

Circuit build_increase_circuit(const ExperimentSpec& spec);
Circuit build_decrease_circuit(const ExperimentSpec& spec);

/// Earliest time after which |r(t') - target| <= band*target holds to the
/// end of the trace; a single excursion restarts the clock. Returns a
/// negative value when the trace never settles.
double settling_time(const std::vector<double>& time, const std::vector<double>& r, double target,
                     double band);

/// Time-ordered (current, voltage) pairs for one branch of a trace set.
/// Throws EvalError when a selector is missing.
std::vector<ViPoint> extract_vi_curve(const TraceSet& traces, const std::string& current_sel,
                                      const std::string& v_plus_sel,
                                      const std::string& v_minus_sel);

/// Slope of the V-I curve where it terminates: a through-origin least
/// squares over the trailing samples that still carry drive current
/// (|i| > i_floor). NaN when the branch never conducted.
double steady_state_slope(const std::vector<ViPoint>& curve, double i_floor,
                          double tail_fraction = 0.10);

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// CSV columns: time,v1,v2,v3,i_mem,v_mem,x,r_mem.
void write_experiment_csv(const ExperimentResult& result, std::ostream& os);

/// Metrics sidecar: final_r, settling_time_2pct, settling_time_5pct,
/// converged, steady_slope. Unsettled times are written as null.
void write_metrics_json(const ExperimentResult& result, std::ostream& os);

} // namespace memsim
