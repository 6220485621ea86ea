#include "memsim/linear.hpp"

#include <cmath>

namespace memsim {

std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b) {
    const size_t n = a.size();
    if (b.size() != n) throw AssemblyError("lu_solve: dimension mismatch");

    // scale reference per row for the relative pivot test
    std::vector<double> row_scale(n, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < n; ++c) row_scale[r] = std::max(row_scale[r], std::abs(a.at(r, c)));
        if (row_scale[r] == 0.0) row_scale[r] = 1.0;
    }

    for (size_t k = 0; k < n; ++k) {
        size_t pivot = k;
        double best = std::abs(a.at(k, k)) / row_scale[k];
        for (size_t r = k + 1; r < n; ++r) {
            double cand = std::abs(a.at(r, k)) / row_scale[r];
            if (cand > best) { best = cand; pivot = r; }
        }
        if (!(best > 1e-13)) throw SingularMatrixError(k);
        if (pivot != k) {
            for (size_t c = 0; c < n; ++c) std::swap(a.at(k, c), a.at(pivot, c));
            std::swap(b[k], b[pivot]);
            std::swap(row_scale[k], row_scale[pivot]);
        }
        const double inv = 1.0 / a.at(k, k);
        for (size_t r = k + 1; r < n; ++r) {
            double f = a.at(r, k) * inv;
            if (f == 0.0) continue;
            for (size_t c = k + 1; c < n; ++c) a.at(r, c) -= f * a.at(k, c);
            b[r] -= f * b[k];
        }
    }

    std::vector<double> x(n, 0.0);
    for (size_t k = n; k-- > 0;) {
        double s = b[k];
        for (size_t c = k + 1; c < n; ++c) s -= a.at(k, c) * x[c];
        x[k] = s / a.at(k, k);
    }
    return x;
}

} // namespace memsim
