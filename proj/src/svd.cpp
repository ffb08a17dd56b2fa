#include "dualtrain/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dualtrain {

namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 60;

double column_dot(const Matrix& a, int i, int j) {
  double s = 0.0;
  for (int k = 0; k < a.rows(); ++k) s += a(k, i) * a(k, j);
  return s;
}

void rotate_columns(Matrix& a, int i, int j, double c, double s) {
  for (int k = 0; k < a.rows(); ++k) {
    const double t1 = a(k, i);
    const double t2 = a(k, j);
    a(k, i) = c * t1 - s * t2;
    a(k, j) = s * t1 + c * t2;
  }
}

// Jacobi SVD of a tall (or square) matrix: orthogonalize the columns of a
// working copy by plane rotations; at convergence the column norms are the
// singular values and the normalized columns the left singular vectors.
Svd jacobi_tall(const Matrix& a) {
  const int m = a.rows();
  const int n = a.cols();
  Matrix work = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_offdiag = 0.0;
    for (int j = 1; j < n; ++j) {
      for (int i = 0; i < j; ++i) {
        const double alpha = column_dot(work, i, i);
        const double beta = column_dot(work, j, j);
        const double gamma = column_dot(work, i, j);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double rel = std::fabs(gamma) / std::sqrt(alpha * beta);
        max_offdiag = std::max(max_offdiag, rel);
        if (gamma == 0.0) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            (zeta >= 0.0 ? 1.0 / (zeta + std::sqrt(1.0 + zeta * zeta))
                         : 1.0 / (zeta - std::sqrt(1.0 + zeta * zeta)));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(work, i, j, c, s);
        rotate_columns(v, i, j, c, s);
      }
    }
    if (max_offdiag <= kJacobiTol) break;
  }

  std::vector<double> sigma(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    sigma[static_cast<std::size_t>(j)] = std::sqrt(column_dot(work, j, j));
  }

  // Sort nonincreasing; stable so equal singular values keep sweep order.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return sigma[static_cast<std::size_t>(x)] >
           sigma[static_cast<std::size_t>(y)];
  });

  Svd out;
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  out.sigma.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    const double sj = sigma[static_cast<std::size_t>(src)];
    out.sigma[static_cast<std::size_t>(j)] = sj;
    if (sj > 0.0) {
      for (int k = 0; k < m; ++k) out.u(k, j) = work(k, src) / sj;
    }
    for (int k = 0; k < n; ++k) out.v(k, j) = v(k, src);
  }

  // Sign fix: largest-magnitude entry of each left singular vector
  // nonnegative (first index wins ties), compensated in v.
  for (int j = 0; j < n; ++j) {
    int arg = 0;
    double best = 0.0;
    for (int k = 0; k < m; ++k) {
      const double mag = std::fabs(out.u(k, j));
      if (mag > best) {
        best = mag;
        arg = k;
      }
    }
    if (out.u(arg, j) < 0.0) {
      for (int k = 0; k < m; ++k) out.u(k, j) = -out.u(k, j);
      for (int k = 0; k < n; ++k) out.v(k, j) = -out.v(k, j);
    }
  }
  return out;
}

}  // namespace

Svd svd(const Matrix& a) {
  if (a.rows() >= a.cols()) {
    return jacobi_tall(a);
  }
  // Wide: factor the transpose and swap the roles of u and v.
  Svd t = jacobi_tall(transpose(a));
  Svd out;
  out.u = std::move(t.v);
  out.v = std::move(t.u);
  out.sigma = std::move(t.sigma);
  return out;
}

Matrix svd_top_rows(const Matrix& g, int d) {
  const int k = std::min(g.rows(), g.cols());
  if (d < 1 || d > k) {
    throw std::invalid_argument("svd_top_rows: d out of range");
  }
  const Svd f = svd(g);
  Matrix p(d, g.rows());
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < g.rows(); ++c) {
      p(r, c) = f.u(c, r);
    }
  }
  return p;
}

Matrix gaussian_matrix(Rng& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  // Column-major fill order so draws line up with vec().
  for (double& x : m.data()) x = scale * rng.next_gaussian();
  return m;
}

Matrix random_orthogonal(Rng& rng, int m) {
  if (m < 1) throw std::invalid_argument("random_orthogonal: m < 1");
  Matrix q = gaussian_matrix(rng, m, m);
  // Two-pass modified Gram-Schmidt on columns. A Gaussian draw is almost
  // surely full rank; the second pass tightens orthogonality to ~1e-15.
  for (int j = 0; j < m; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < j; ++i) {
        const double proj = column_dot(q, i, j);
        for (int k = 0; k < m; ++k) q(k, j) -= proj * q(k, i);
      }
    }
    const double norm = std::sqrt(column_dot(q, j, j));
    for (int k = 0; k < m; ++k) q(k, j) /= norm;
  }
  for (int j = 0; j < m; ++j) {
    int arg = 0;
    double best = 0.0;
    for (int k = 0; k < m; ++k) {
      const double mag = std::fabs(q(k, j));
      if (mag > best) {
        best = mag;
        arg = k;
      }
    }
    if (q(arg, j) < 0.0) {
      for (int k = 0; k < m; ++k) q(k, j) = -q(k, j);
    }
  }
  return q;
}

}  // namespace dualtrain
