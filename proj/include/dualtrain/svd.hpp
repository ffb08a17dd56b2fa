#ifndef DUALTRAIN_SVD_HPP
#define DUALTRAIN_SVD_HPP

#include "dualtrain/matrix.hpp"
#include "dualtrain/rng.hpp"

namespace dualtrain {

// Thin SVD: a = u * diag(sigma) * v^T with u (m x k), v (n x k),
// k = min(m, n), sigma nonincreasing. Columns past the numerical rank of a
// degenerate input come back as zero columns.
struct Svd {
  Matrix u;
  std::vector<double> sigma;
  Matrix v;
};

// One-sided Jacobi on the tall orientation. Deterministic: fixed cyclic pair
// order, convergence when the largest relative off-diagonal of the implicit
// Gram matrix drops below 1e-12, at most 60 sweeps, and a sign convention
// that makes the largest-magnitude entry of each left singular vector
// nonnegative.
Svd svd(const Matrix& a);

// Transpose of the top-d left singular vectors of g, as a d x rows(g) matrix
// with orthonormal rows ordered by nonincreasing singular value.
Matrix svd_top_rows(const Matrix& g, int d);

// Orthonormalized square standard-Gaussian matrix (two-pass Gram-Schmidt over
// columns), with each column's largest-magnitude entry forced nonnegative.
Matrix random_orthogonal(Rng& rng, int m);

// m x n matrix of iid standard normals scaled by `scale`.
Matrix gaussian_matrix(Rng& rng, int rows, int cols, double scale = 1.0);

}  // namespace dualtrain

#endif
