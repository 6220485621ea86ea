// Benchmark: OpenMP sweep execution against the serial reference. The runs
// are independent simulations, so the parallel path must reproduce the
// serial rows exactly; this also doubles as a consistency check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "memsim/sweep.hpp"

using namespace memsim;

namespace {

double seconds_for(const SweepRequest& req, bool parallel, std::vector<SweepRow>& rows) {
    auto t0 = std::chrono::steady_clock::now();
    rows = run_sweep(req, parallel);
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

bool rows_identical(const std::vector<SweepRow>& a, const std::vector<SweepRow>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].ok != b[i].ok || a[i].value != b[i].value) return false;
        if (a[i].metrics.final_r != b[i].metrics.final_r) return false;
        if (a[i].metrics.settling_time_5pct != b[i].metrics.settling_time_5pct) return false;
        if (a[i].metrics.steady_slope != b[i].metrics.steady_slope) return false;
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    bool quick = argc > 1 && std::string(argv[1]) == "--quick";

    SweepRequest req;
    req.base.kind = ExperimentKind::Increase;
    req.base.transient.t_stop = quick ? 2e-3 : 15e-3;
    req.axis = SweepAxis::RRef;
    req.values = {1.5e3, 2e3, 2.5e3, 3e3, 3.5e3, 4e3};

#ifdef _OPENMP
    std::printf("omp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both paths run serially\n");
#endif
    std::printf("sweep: %zu increase runs, t_stop = %g s, dt = %g s\n", req.values.size(),
                req.base.transient.t_stop, req.base.transient.dt);

    std::vector<SweepRow> serial_rows, parallel_rows;
    double t_serial = seconds_for(req, /*parallel=*/false, serial_rows);
    double t_parallel = seconds_for(req, /*parallel=*/true, parallel_rows);

    std::printf("serial   : %8.3f s\n", t_serial);
    std::printf("parallel : %8.3f s  (speedup %.2fx)\n", t_parallel,
                t_parallel > 0 ? t_serial / t_parallel : 0.0);

    if (!rows_identical(serial_rows, parallel_rows)) {
        std::printf("FAIL: parallel rows differ from the serial reference\n");
        return 1;
    }
    std::printf("parallel rows match the serial reference bit for bit\n");
    return 0;
}
