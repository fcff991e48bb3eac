#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "lpvlab/matlib.hpp"

using namespace lpvlab::matlib;

namespace {

Matrix make(int r, int c, std::initializer_list<double> v) {
  Matrix m(r, c);
  std::copy(v.begin(), v.end(), m.a.begin());
  return m;
}

SymMatrix make_sym(int n, std::initializer_list<double> v) {
  return SymMatrix::from(make(n, n, v));
}

SymMatrix random_sym(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(n, n);
  for (double& v : m.a) v = d(gen);
  return SymMatrix::from(m);
}

double trace_of(const SymMatrix& m) {
  double t = 0.0;
  for (int i = 0; i < m.n; ++i) t += m(i, i);
  return t;
}

}  // namespace

TEST_CASE("eigendecomposition of identity and diagonal matrices") {
  auto e = sym_eig(SymMatrix::from(Matrix::identity(4)));
  REQUIRE(e.converged);
  for (double v : e.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  auto d = sym_eig(make_sym(3, {3, 0, 0, 0, 1, 0, 0, 0, 2}));
  REQUIRE(d.converged);
  CHECK(d.values[0] == doctest::Approx(1.0));
  CHECK(d.values[1] == doctest::Approx(2.0));
  CHECK(d.values[2] == doctest::Approx(3.0));
}

TEST_CASE("2x2 eigenpairs match the closed form") {
  auto e = sym_eig(make_sym(2, {2, 1, 1, 2}));
  REQUIRE(e.converged);
  CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
  // eigenvector of lambda=1 is (1,-1)/sqrt(2) up to sign
  double r = e.vectors(0, 0) / e.vectors(1, 0);
  CHECK(r == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("negative definiteness of 2x2 fixtures agrees with trace/det signs") {
  // For symmetric 2x2: negative definite iff trace < 0 and det > 0.
  auto q0 = make_sym(2, {-1.1058, 1.3915, 1.3915, -6.9510});
  auto q9 = make_sym(2, {-12.3378, 18.8794, 18.8794, -31.9746});
  for (const auto& q : {q0, q9}) {
    double tr = q(0, 0) + q(1, 1);
    double de = q(0, 0) * q(1, 1) - q(0, 1) * q(1, 0);
    REQUIRE(tr < 0.0);
    REQUIRE(de > 0.0);
    CHECK(is_neg_def(q));
  }
  auto indef = make_sym(2, {-1, 3, 3, -1});  // det < 0
  CHECK_FALSE(is_neg_def(indef));
}

TEST_CASE("negative definiteness margin is strict") {
  auto m = make_sym(2, {-1, 0, 0, -1e-3});
  CHECK(is_neg_def(m));
  CHECK_FALSE(is_neg_def(m, 1e-3));  // lambda_max == -margin fails the strict test
  CHECK(is_neg_def(m, 9e-4));
  auto semi = make_sym(2, {-1, 0, 0, 0});
  CHECK_FALSE(is_neg_def(semi));  // zero eigenvalue is not accepted
}

TEST_CASE("cholesky factor of a 2x2 positive definite matrix") {
  auto l = cholesky(make_sym(2, {4, 2, 2, 3}));
  REQUIRE(l.has_value());
  CHECK((*l)(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK((*l)(0, 1) == 0.0);
  CHECK((*l)(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((*l)(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  CHECK_FALSE(cholesky(make_sym(2, {1, 2, 2, 1})).has_value());  // indefinite
}

TEST_CASE("linear solve satisfies the residual bound") {
  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    int n = 1 + rep % 6;
    Matrix a(n, n), b(n, 1);
    for (double& v : a.a) v = d(gen);
    for (double& v : b.a) v = d(gen);
    // condition estimate from the singular spectrum of a
    auto ata = sym_eig(SymMatrix::from(transpose(a) * a));
    REQUIRE(ata.converged);
    if (ata.values.front() <= 0.0) continue;
    double cond = std::sqrt(ata.values.back() / ata.values.front());
    if (cond >= 1e6) continue;
    auto x = solve(a, b);
    REQUIRE(x.has_value());
    double res = frob_norm(a * *x - b);
    CHECK(res <= 1e-9 * (1.0 + frob_norm(b)));
  }
}

TEST_CASE("singular systems are rejected") {
  auto x = solve(make(2, 2, {1, 2, 2, 4}), make(2, 1, {1, 1}));
  CHECK_FALSE(x.has_value());
}

TEST_CASE("complex resolvent of a scalar system") {
  Matrix a(1, 1);
  a(0, 0) = -1.0;
  auto r = complex_resolvent(a, 1.0);  // (j + 1)^-1 = 0.5 - 0.5j
  REQUIRE(r.has_value());
  CHECK((*r)(0, 0).real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK((*r)(0, 0).imag() == doctest::Approx(-0.5).epsilon(1e-14));

  Matrix z(1, 1);  // integrator: resolvent at omega = 0 is singular
  CHECK_FALSE(complex_resolvent(z, 0.0).has_value());
}

TEST_CASE("determinants of small matrices") {
  CHECK(det(make(2, 2, {1, 2, 3, 4})) == doctest::Approx(-2.0));
  CHECK(det(make(3, 3, {2, 0, 0, 0, 3, 0, 0, 0, 4})) == doctest::Approx(24.0));
  CHECK(det(Matrix::identity(5)) == doctest::Approx(1.0));
}

TEST_CASE("eigenvalues are ascending and consistent with trace and determinant") {
  std::mt19937 gen(777);
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 1 + rep % 8;
    auto m = random_sym(gen, n);
    auto e = sym_eig(m);
    REQUIRE(e.converged);
    double sum = 0.0, prod = 1.0;
    for (size_t k = 0; k < e.values.size(); ++k) {
      if (k > 0) CHECK(e.values[k] >= e.values[k - 1]);
      sum += e.values[k];
      prod *= e.values[k];
    }
    CHECK(sum == doctest::Approx(trace_of(m)).epsilon(1e-9));
    double dm = det(m.full());
    CHECK(std::fabs(prod - dm) <= 1e-9 * (1.0 + std::fabs(dm)));
  }
}

TEST_CASE("eigendecomposition reconstructs the matrix with orthonormal vectors") {
  std::mt19937 gen(4242);
  for (int rep = 0; rep < 300; ++rep) {
    int n = 1 + rep % 8;
    auto m = random_sym(gen, n);
    auto e = sym_eig(m);
    REQUIRE(e.converged);
    Matrix lam(n, n);
    for (int i = 0; i < n; ++i) lam(i, i) = e.values[i];
    Matrix recon = e.vectors * lam * transpose(e.vectors);
    CHECK(frob_norm(recon - m.full()) <= 1e-10 * (1.0 + m.frob()));
    Matrix vtv = transpose(e.vectors) * e.vectors;
    CHECK(frob_norm(vtv - Matrix::identity(n)) <= 1e-10);
  }
}

TEST_CASE("cholesky succeeds exactly when all eigenvalues are positive") {
  std::mt19937 gen(99);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 1 + rep % 6;
    auto m = random_sym(gen, n);
    auto e = sym_eig(m);
    REQUIRE(e.converged);
    if (std::fabs(e.values.front()) <= 1e-8) continue;  // skip borderline
    ++checked;
    CHECK(cholesky(m).has_value() == (e.values.front() > 0.0));
  }
  CHECK(checked > 900);
}
