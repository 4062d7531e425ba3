#include "dcpf/linalg.hpp"

#include <cmath>

#include "dcpf/errors.hpp"

namespace dcpf {

namespace {

// In-place lower Cholesky factor. Returns false on a non-positive pivot.
bool cholesky_factor(DenseMatrix& m) {
  const int n = m.rows;
  for (int j = 0; j < n; ++j) {
    double d = m.at(j, j);
    for (int k = 0; k < j; ++k) d -= m.at(j, k) * m.at(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    m.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = m.at(i, j);
      for (int k = 0; k < j; ++k) s -= m.at(i, k) * m.at(j, k);
      m.at(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

std::vector<double> cholesky_solve(const DenseMatrix& A, std::span<const double> b) {
  if (A.rows != A.cols || static_cast<size_t>(A.rows) != b.size())
    throw DimensionMismatch("cholesky_solve: dimension mismatch");
  DenseMatrix L = A;
  if (!cholesky_factor(L))
    throw SingularSystem("cholesky_solve: matrix is not positive definite");
  const int n = L.rows;
  std::vector<double> x(b.begin(), b.end());
  // forward substitution L y = b
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= L.at(i, k) * x[k];
    x[i] = s / L.at(i, i);
  }
  // back substitution L^T x = y
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= L.at(k, i) * x[k];
    x[i] = s / L.at(i, i);
  }
  return x;
}

bool is_positive_definite(const DenseMatrix& A) {
  if (A.rows != A.cols) return false;
  DenseMatrix L = A;
  return cholesky_factor(L);
}

}  // namespace dcpf
