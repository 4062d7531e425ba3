#pragma once

#include <span>
#include <vector>

namespace dcpf {

// Minimal row-major dense matrix. System sizes here top out around 2K = 72
// buses, so dense storage and O(n^3) factorizations are the right tool.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Solves A x = b for symmetric positive definite A via Cholesky (LL^T).
// Throws SingularSystem if a pivot is not strictly positive.
std::vector<double> cholesky_solve(const DenseMatrix& A, std::span<const double> b);

// True if the Cholesky factorization succeeds (SPD check used by tests).
bool is_positive_definite(const DenseMatrix& A);

}  // namespace dcpf
