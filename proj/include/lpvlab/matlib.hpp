#pragma once

#include <complex>
#include <optional>
#include <vector>

// Dense linear algebra for the small matrices of this project (dim <= ~12).
// Everything is value-semantic and row-major; no attempt at cache blocking.

namespace lpvlab::matlib {

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static Matrix identity(int n);
  bool finite() const;
};

Matrix operator+(const Matrix& x, const Matrix& y);
Matrix operator-(const Matrix& x, const Matrix& y);
Matrix operator*(const Matrix& x, const Matrix& y);
Matrix operator*(double s, const Matrix& x);
Matrix transpose(const Matrix& x);
double frob_norm(const Matrix& x);
double max_abs(const Matrix& x);

// Symmetric matrix; full storage with both triangles kept in sync.
struct SymMatrix {
  int n = 0;
  std::vector<double> a;

  SymMatrix() = default;
  explicit SymMatrix(int dim) : n(dim), a(static_cast<size_t>(dim) * dim, 0.0) {}
  // Symmetrizes m as (m + m^T)/2.
  static SymMatrix from(const Matrix& m);

  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
  void set(int i, int j, double v) {
    a[static_cast<size_t>(i) * n + j] = v;
    a[static_cast<size_t>(j) * n + i] = v;
  }
  Matrix full() const;
  double frob() const;
};

struct ComplexMatrix {
  int rows = 0, cols = 0;
  std::vector<std::complex<double>> a;

  ComplexMatrix() = default;
  ComplexMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}
  std::complex<double>& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  std::complex<double> operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

ComplexMatrix operator*(const ComplexMatrix& x, const ComplexMatrix& y);

struct EigResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns, orthonormal
  bool converged = false;
};

// Cyclic Jacobi rotations; off-diagonal Frobenius threshold 1e-12 relative,
// sweep cap 100.
EigResult sym_eig(const SymMatrix& m);

// Strict test: true iff lambda_max < -margin.
bool is_neg_def(const SymMatrix& m, double margin = 0.0);

// Lower-triangular L with L L^T = m, or nullopt when m is not positive
// definite (the failure doubles as a definiteness test).
std::optional<Matrix> cholesky(const SymMatrix& m);

// LU with partial pivoting; nullopt when singular to tolerance.
std::optional<Matrix> solve(const Matrix& a, const Matrix& b);
std::optional<ComplexMatrix> solve(const ComplexMatrix& a, const ComplexMatrix& b);

// (j*omega*I - a)^{-1}; nullopt at a resonance.
std::optional<ComplexMatrix> complex_resolvent(const Matrix& a, double omega);

double det(const Matrix& m);  // dims <= 3 via cofactors, larger via LU

}  // namespace lpvlab::matlib
