#pragma once

#include <cstddef>
#include <vector>

#include "memsim/errors.hpp"

namespace memsim {

/// Row-major dense square matrix. Systems here stay tiny (tens of
/// unknowns), so a dense LU with partial pivoting is all we need.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    explicit DenseMatrix(size_t n) : n_(n), a_(n * n, 0.0) {}

    size_t size() const { return n_; }
    double& at(size_t r, size_t c) { return a_[r * n_ + c]; }
    double at(size_t r, size_t c) const { return a_[r * n_ + c]; }
    void clear() { a_.assign(n_ * n_, 0.0); }
    void resize(size_t n) { n_ = n; a_.assign(n * n, 0.0); }

  private:
    size_t n_ = 0;
    std::vector<double> a_;
};

/// Thrown when elimination meets a pivot too small to trust; `column` is
/// the structural unknown the failure points at.
struct SingularMatrixError : AssemblyError {
    size_t column;
    explicit SingularMatrixError(size_t col)
        : AssemblyError("singular system: no usable pivot for unknown " + std::to_string(col)),
          column(col) {}
};

/// Solve A x = b in place (A is destroyed). Partial pivoting; throws
/// SingularMatrixError when the matrix is numerically rank-deficient.
std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b);

} // namespace memsim
