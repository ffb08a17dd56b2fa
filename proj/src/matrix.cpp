#include "dualtrain/matrix.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dualtrain {

Vector Vector::from_data(std::vector<double> data) {
  Vector v;
  v.data_ = std::move(data);
  return v;
}

bool Vector::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  data_.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != cols_) {
      throw std::invalid_argument("Matrix init: ragged rows");
    }
    int j = 0;
    for (double x : row) {
      (*this)(i, j) = x;
      ++j;
    }
    ++i;
  }
}

Matrix Matrix::from_column_major(int rows, int cols, std::vector<double> data) {
  if (static_cast<std::int64_t>(data.size()) !=
      static_cast<std::int64_t>(rows) * cols) {
    throw std::invalid_argument("Matrix::from_column_major: size mismatch");
  }
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector vec(const Matrix& m) {
  return Vector::from_data(
      std::vector<double>(m.data().begin(), m.data().end()));
}

Matrix unvec(const Vector& v, int rows, int cols) {
  if (static_cast<std::int64_t>(v.dim()) !=
      static_cast<std::int64_t>(rows) * cols) {
    throw std::invalid_argument("unvec: dim != rows*cols");
  }
  return Matrix::from_column_major(
      rows, cols, std::vector<double>(v.data().begin(), v.data().end()));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Matrix c(a.rows(), b.cols());
  // j-k-i nest for column-major locality; each c(i,j) still accumulates over
  // k in ascending order, which pins the rounding sequence.
  for (int j = 0; j < b.cols(); ++j) {
    for (int k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      for (int i = 0; i < a.rows(); ++i) {
        c(i, j) += a(i, k) * bkj;
      }
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = 0; i < m.rows(); ++i) {
      t(j, i) = m(i, j);
    }
  }
  return t;
}

static void check_same_shape(const Matrix& a, const Matrix& b,
                             const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "Matrix +");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "Matrix -");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix c = m;
  for (double& x : c.data()) x *= s;
  return c;
}

Vector operator+(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("Vector +: dim mismatch");
  Vector c = a;
  for (int i = 0; i < c.dim(); ++i) c[i] += b[i];
  return c;
}

Vector operator-(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("Vector -: dim mismatch");
  Vector c = a;
  for (int i = 0; i < c.dim(); ++i) c[i] -= b[i];
  return c;
}

Vector operator*(double s, const Vector& v) {
  Vector c = v;
  for (int i = 0; i < c.dim(); ++i) c[i] *= s;
  return c;
}

void add_scaled(Vector& y, double s, const Vector& x) {
  if (y.dim() != x.dim()) {
    throw std::invalid_argument("add_scaled: dim mismatch");
  }
  for (int i = 0; i < y.dim(); ++i) y[i] += s * x[i];
}

void add_scaled(Matrix& y, double s, const Matrix& x) {
  check_same_shape(y, x, "add_scaled");
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += s * xd[i];
}

double dot(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dot: dim mismatch");
  }
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "frobenius_inner");
  double s = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
  return s;
}

double frobenius_norm(const Matrix& m) {
  return std::sqrt(frobenius_inner(m, m));
}

double l2_norm(const Vector& v) { return std::sqrt(dot(v, v)); }

double linf_norm(const Vector& v) {
  double s = 0.0;
  for (int i = 0; i < v.dim(); ++i) s = std::max(s, std::fabs(v[i]));
  return s;
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data()) s = std::max(s, std::fabs(x));
  return s;
}

std::uint64_t fnv1a_bytes(std::span<const double> xs) {
  std::uint64_t h = 1469598103934665603ull;
  for (double x : xs) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace dualtrain
