#pragma once

#include <functional>
#include <string>
#include <vector>

#include "memsim/experiment.hpp"

namespace memsim {

enum class SweepAxis { RRef, Supply };

struct SweepRequest {
    ExperimentSpec base;
    SweepAxis axis = SweepAxis::RRef;
    std::vector<double> values; // at least two
};

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    std::string error;
    ExperimentMetrics metrics;
};

/// Instantiate the spec for one sweep point.
ExperimentSpec sweep_point(const SweepRequest& req, double value);

/// Run every point and collect one row per value, in order. A failing run
/// marks its row and the sweep continues. `on_result` (optional) receives
/// each finished run; with `parallel` it must be thread-safe.
///
/// The parallel path fans the runs out with OpenMP; runs share no state, so
/// serial and parallel execution produce identical rows (the serial path is
/// kept as the reference the tests and the benchmark compare against).
/// `max_threads` caps the worker count; 0 picks the OpenMP default.
std::vector<SweepRow> run_sweep(const SweepRequest& req, bool parallel = true,
                                int max_threads = 0,
                                const std::function<void(size_t, const ExperimentResult&)>&
                                    on_result = {});

/// "value,final_r,settling_time_2pct,settling_time_5pct,converged,steady_slope,status"
void write_sweep_summary_csv(const std::vector<SweepRow>& rows, std::ostream& os);

} // namespace memsim
