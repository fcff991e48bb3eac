#include "lpvlab/matlib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lpvlab::matlib {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::finite() const {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

static void check_same_shape(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols)
    throw std::invalid_argument("matrix shape mismatch");
}

Matrix operator+(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y);
  Matrix r = x;
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
  return r;
}

Matrix operator-(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y);
  Matrix r = x;
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
  return r;
}

Matrix operator*(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matrix product shape mismatch");
  Matrix r(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) r(i, j) += xik * y(k, j);
    }
  return r;
}

Matrix operator*(double s, const Matrix& x) {
  Matrix r = x;
  for (double& v : r.a) v *= s;
  return r;
}

Matrix transpose(const Matrix& x) {
  Matrix r(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
  return r;
}

double frob_norm(const Matrix& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& x) {
  double m = 0.0;
  for (double v : x.a) m = std::max(m, std::abs(v));
  return m;
}

SymMatrix SymMatrix::from(const Matrix& m) {
  if (m.rows != m.cols) throw std::invalid_argument("symmetric matrix must be square");
  SymMatrix s(m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.rows; ++j) s.a[static_cast<size_t>(i) * m.rows + j] = 0.5 * (m(i, j) + m(j, i));
  return s;
}

Matrix SymMatrix::full() const {
  Matrix m(n, n);
  m.a = a;
  return m;
}

double SymMatrix::frob() const {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

ComplexMatrix operator*(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matrix product shape mismatch");
  ComplexMatrix r(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const auto xik = x(i, k);
      for (int j = 0; j < y.cols; ++j) r(i, j) += xik * y(k, j);
    }
  return r;
}

EigResult sym_eig(const SymMatrix& m) {
  const int n = m.n;
  EigResult out;
  out.vectors = Matrix::identity(n);
  Matrix a = m.full();

  auto offdiag = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  const double scale = std::max(1.0, m.frob());
  const double thresh = 1e-12 * scale;
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (offdiag() <= thresh) {
      out.converged = true;
      break;
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= thresh / (n * n)) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = out.vectors(k, p), vkq = out.vectors(k, q);
          out.vectors(k, p) = c * vkp - s * vkq;
          out.vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!out.converged && offdiag() <= thresh) out.converged = true;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  out.values.resize(n);
  Matrix v(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) v(i, j) = out.vectors(i, order[j]);
  }
  out.vectors = v;
  return out;
}

bool is_neg_def(const SymMatrix& m, double margin) {
  const EigResult e = sym_eig(m);
  if (!e.converged) return false;
  return e.values.back() < -margin;
}

std::optional<Matrix> cholesky(const SymMatrix& m) {
  const int n = m.n;
  Matrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0 || !std::isfinite(d)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

namespace {

// LU with partial pivoting over a generic scalar (double or complex<double>).
template <class T, class Mat>
std::optional<Mat> lu_solve(Mat a, Mat b) {
  if (a.rows != a.cols) throw std::invalid_argument("solve: matrix not square");
  if (a.rows != b.rows) throw std::invalid_argument("solve: rhs row mismatch");
  const int n = a.rows;
  double amax = 0.0;
  for (const auto& v : a.a) amax = std::max(amax, std::abs(v));
  const double tol = 1e-14 * std::max(1.0, amax);

  std::vector<int> piv(n);
  std::iota(piv.begin(), piv.end(), 0);
  for (int k = 0; k < n; ++k) {
    int imax = k;
    double best = std::abs(a(k, k));
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > best) { best = std::abs(a(i, k)); imax = i; }
    if (best <= tol) return std::nullopt;
    if (imax != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(imax, j));
      for (int j = 0; j < b.cols; ++j) std::swap(b(k, j), b(imax, j));
    }
    for (int i = k + 1; i < n; ++i) {
      const T f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      for (int j = 0; j < b.cols; ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (int j = 0; j < b.cols; ++j)
    for (int i = n - 1; i >= 0; --i) {
      T s = b(i, j);
      for (int k = i + 1; k < n; ++k) s -= a(i, k) * b(k, j);
      b(i, j) = s / a(i, i);
    }
  return b;
}

}  // namespace

std::optional<Matrix> solve(const Matrix& a, const Matrix& b) {
  return lu_solve<double, Matrix>(a, b);
}

std::optional<ComplexMatrix> solve(const ComplexMatrix& a, const ComplexMatrix& b) {
  return lu_solve<std::complex<double>, ComplexMatrix>(a, b);
}

std::optional<ComplexMatrix> complex_resolvent(const Matrix& a, double omega) {
  if (a.rows != a.cols) throw std::invalid_argument("resolvent: matrix not square");
  const int n = a.rows;
  ComplexMatrix m(n, n), id(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = std::complex<double>(-a(i, j), i == j ? omega : 0.0);
  for (int i = 0; i < n; ++i) id(i, i) = 1.0;
  return solve(m, id);
}

double det(const Matrix& m) {
  if (m.rows != m.cols) throw std::invalid_argument("det: matrix not square");
  const int n = m.rows;
  if (n == 0) return 1.0;
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (n == 3)
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  // LU-based for larger dims
  Matrix a = m;
  double d = 1.0;
  for (int k = 0; k < n; ++k) {
    int imax = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(imax, k))) imax = i;
    if (a(imax, k) == 0.0) return 0.0;
    if (imax != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(imax, j));
      d = -d;
    }
    d *= a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return d;
}

}  // namespace lpvlab::matlib
