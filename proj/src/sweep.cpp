#include "memsim/sweep.hpp"

#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace memsim {

ExperimentSpec sweep_point(const SweepRequest& req, double value) {
    ExperimentSpec spec = req.base;
    if (req.axis == SweepAxis::RRef) {
        spec.r_ref = value;
    } else {
        spec.supply = value;
    }
    return spec;
}

std::vector<SweepRow> run_sweep(const SweepRequest& req, bool parallel, int max_threads,
                                const std::function<void(size_t, const ExperimentResult&)>&
                                    on_result) {
    if (req.values.size() < 2)
        throw ConfigError("sweep: need at least two axis values");

    const size_t n = req.values.size();
    std::vector<SweepRow> rows(n);

    auto run_one = [&](size_t idx) {
        SweepRow& row = rows[idx];
        row.value = req.values[idx];
        try {
            ExperimentResult result = run_experiment(sweep_point(req, row.value));
            row.metrics = result.metrics;
            row.ok = true;
            if (on_result) on_result(idx, result);
        } catch (const SimError& e) {
            row.ok = false;
            row.error = e.what();
        }
    };

#ifdef _OPENMP
    if (parallel) {
        int threads = omp_get_max_threads();
        if (max_threads > 0) threads = std::min(threads, max_threads);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long i = 0; i < static_cast<long>(n); ++i) run_one(static_cast<size_t>(i));
        return rows;
    }
#else
    (void)parallel;
    (void)max_threads;
#endif
    for (size_t i = 0; i < n; ++i) run_one(i);
    return rows;
}

void write_sweep_summary_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "value,final_r,settling_time_2pct,settling_time_5pct,converged,steady_slope,status\n";
    for (const SweepRow& r : rows) {
        os << format_csv_number(r.value) << ',';
        if (r.ok) {
            os << format_csv_number(r.metrics.final_r) << ','
               << format_csv_number(r.metrics.settling_time_2pct) << ','
               << format_csv_number(r.metrics.settling_time_5pct) << ','
               << (r.metrics.converged ? 1 : 0) << ','
               << format_csv_number(r.metrics.steady_slope) << ",ok\n";
        } else {
            os << ",,,,,failed\n";
        }
    }
}

} // namespace memsim
