#ifndef DUALTRAIN_MATRIX_HPP
#define DUALTRAIN_MATRIX_HPP

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace dualtrain {

class Matrix;

class Vector {
 public:
  Vector() = default;
  explicit Vector(int dim) : data_(static_cast<std::size_t>(dim), 0.0) {}
  Vector(std::initializer_list<double> xs) : data_(xs) {}
  static Vector from_data(std::vector<double> data);

  int dim() const { return static_cast<int>(data_.size()); }
  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;

 private:
  std::vector<double> data_;
};

// Dense real matrix, column-major: (i, j) lives at data[i + j*rows], so the
// column-stacking vec() is a plain reinterpretation of the storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows),
        cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
              0.0) {}
  // Rows listed top to bottom, as written on paper.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix from_column_major(int rows, int cols, std::vector<double> data);
  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t size() const {
    return static_cast<std::int64_t>(rows_) * cols_;
  }

  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) +
                 static_cast<std::size_t>(j) * static_cast<std::size_t>(rows_)];
  }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) +
                 static_cast<std::size_t>(j) * static_cast<std::size_t>(rows_)];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// vec / unvec: column stacking and its inverse. Bitwise mutual inverses.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, int rows, int cols);

// C = A * B with accumulation over the inner index in ascending order, so the
// result is bit-identical to the naive (row, inner, col) triple loop.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& v);

// y += s * x
void add_scaled(Vector& y, double s, const Vector& x);
void add_scaled(Matrix& y, double s, const Matrix& x);

double dot(const Vector& a, const Vector& b);
double frobenius_inner(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double l2_norm(const Vector& v);
double linf_norm(const Vector& v);
double max_abs(const Matrix& m);

// FNV-1a over the raw little-endian bytes; used for trajectory fingerprints
// and determinism checks.
std::uint64_t fnv1a_bytes(std::span<const double> xs);

}  // namespace dualtrain

#endif
