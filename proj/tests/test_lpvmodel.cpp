#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "lpvlab/freq.hpp"
#include "lpvlab/lpvmodel.hpp"

using namespace lpvlab::lpvmodel;
using lpvlab::matlib::Matrix;

namespace {

Matrix make(int r, int c, std::initializer_list<double> v) {
  Matrix m(r, c);
  std::copy(v.begin(), v.end(), m.a.begin());
  return m;
}

// First-order plant x' = -(1 + rho) x + d + u, y = x, e-reporting output
// z = -x + r, inputs w = (r, d).
AffineLpvSS example_plant() {
  AffineLpvSS p;
  p.n_x = 1;
  p.n_w = 2;
  p.n_u = 1;
  p.n_z = 1;
  p.n_y = 1;
  p.n_rho = 1;
  p.P = {{0.0, 9.0}};
  p.A = {{make(1, 1, {-1.0}), make(1, 1, {-1.0})}};
  p.Bw = AffineMat::constant(make(1, 2, {0.0, 1.0}), 1);
  p.Bu = AffineMat::constant(make(1, 1, {1.0}), 1);
  p.Cz = AffineMat::constant(make(1, 1, {-1.0}), 1);
  p.Dzw = AffineMat::constant(make(1, 2, {1.0, 0.0}), 1);
  p.Dzu = AffineMat::constant(make(1, 1, {0.0}), 1);
  p.Cy = AffineMat::constant(make(1, 1, {1.0}), 1);
  p.Dyw = AffineMat::constant(make(1, 2, {0.0, 0.0}), 1);
  p.Dyu = AffineMat::constant(make(1, 1, {0.0}), 1);
  return p;
}

// PI-like controller with scheduled proportional gain: xc' = uc,
// yc = (k11 + k12 rho) xc + k21 uc.
AffineLpvSS example_controller(double k11 = 5.0, double k12 = 2.0, double k21 = 1.0) {
  AffineLpvSS c;
  c.n_x = 1;
  c.n_u = 1;
  c.n_y = 1;
  c.n_rho = 1;
  c.P = {{0.0, 9.0}};
  c.A = AffineMat::constant(make(1, 1, {0.0}), 1);
  c.Bu = AffineMat::constant(make(1, 1, {1.0}), 1);
  c.Cy = {{make(1, 1, {k11}), make(1, 1, {k12})}};
  c.Dyu = AffineMat::constant(make(1, 1, {k21}), 1);
  c.Bw = AffineMat::constant(Matrix(1, 0), 1);
  c.Cz = AffineMat::constant(Matrix(0, 1), 1);
  c.Dzw = AffineMat::constant(Matrix(0, 0), 1);
  c.Dzu = AffineMat::constant(Matrix(0, 1), 1);
  c.Dyw = AffineMat::constant(Matrix(1, 0), 1);
  return c;
}

Wiring error_feedback() {
  Wiring w;
  w.w_names = {"r", "d"};
  w.y_names = {"y"};
  w.uc_equations = {{{1.0, "r"}, {-1.0, "y"}}};
  return w;
}

SchedulingMap square_first_state() {
  SchedulingMap mu;
  mu.n_x_in = 1;
  mu.range = {{0.0, 9.0}};
  mu.components = {{{1.0, {2}}}};
  return mu;
}

}  // namespace

TEST_CASE("affine evaluation and the constant helper") {
  AffineMat m = {{make(2, 2, {1, 0, 0, 1}), make(2, 2, {0, 1, 1, 0})}};
  Matrix at2 = m.eval({2.0});
  CHECK(at2(0, 0) == 1.0);
  CHECK(at2(0, 1) == 2.0);
  CHECK_FALSE(m.rho_constant());

  AffineMat c = AffineMat::constant(make(1, 1, {7.0}), 3);
  REQUIRE(c.coef.size() == 4);
  CHECK(c.rho_constant());
  CHECK(c.eval({1.0, 2.0, 3.0})(0, 0) == 7.0);
  CHECK_THROWS_AS(m.eval({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("closed-loop state matrix at the scheduling extremes") {
  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  REQUIRE(clp.sys.n_x == 2);
  REQUIRE(clp.sys.n_w == 2);
  REQUIRE(clp.sys.n_z == 1);
  CHECK(clp.n_plant_states == 1);

  Matrix a0 = clp.sys.A.eval({0.0});
  CHECK(a0(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(a0(0, 1) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(a0(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(a0(1, 1) == doctest::Approx(0.0).epsilon(1e-14));

  Matrix a9 = clp.sys.A.eval({9.0});
  CHECK(a9(0, 0) == doctest::Approx(-11.0).epsilon(1e-14));
  CHECK(a9(0, 1) == doctest::Approx(23.0).epsilon(1e-14));
  CHECK(a9(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(a9(1, 1) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("closed-loop input, output and feedthrough blocks") {
  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  for (double rho : {0.0, 3.7, 9.0}) {
    Matrix b = clp.sys.Bw.eval({rho});
    CHECK(b(0, 0) == doctest::Approx(1.0));   // r through k21
    CHECK(b(0, 1) == doctest::Approx(1.0));   // d direct
    CHECK(b(1, 0) == doctest::Approx(1.0));   // r into the integrator
    CHECK(b(1, 1) == doctest::Approx(0.0));
    Matrix c = clp.sys.Cz.eval({rho});
    CHECK(c(0, 0) == doctest::Approx(-1.0));  // z = r - x
    CHECK(c(0, 1) == doctest::Approx(0.0));
    Matrix d = clp.sys.Dzw.eval({rho});
    CHECK(d(0, 0) == doctest::Approx(1.0));
    CHECK(d(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("interconnection matches direct elimination at random scheduling values") {
  auto plant = example_plant();
  auto ctrl = example_controller();
  auto clp = interconnect(plant, ctrl, error_feedback());
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> dr(0.0, 9.0);
  std::uniform_real_distribution<double> dx(-2.0, 2.0);
  for (int rep = 0; rep < 100; ++rep) {
    double rho = dr(gen);
    double x = dx(gen), xc = dx(gen), r = dx(gen), d = dx(gen);
    // direct elimination: uc = r - y, u = yc
    auto pm = eval_matrices(plant, {rho});
    auto cm = eval_matrices(ctrl, {rho});
    double y = pm.Cy(0, 0) * x;
    double uc = r - y;
    double u = cm.Cy(0, 0) * xc + cm.Dyu(0, 0) * uc;
    double dx_ref = pm.A(0, 0) * x + pm.Bw(0, 0) * r + pm.Bw(0, 1) * d + pm.Bu(0, 0) * u;
    double dxc_ref = cm.A(0, 0) * xc + cm.Bu(0, 0) * uc;
    double z_ref = pm.Cz(0, 0) * x + pm.Dzw(0, 0) * r + pm.Dzw(0, 1) * d;

    auto m = eval_matrices(clp.sys, {rho});
    double dx_cl = m.A(0, 0) * x + m.A(0, 1) * xc + m.Bw(0, 0) * r + m.Bw(0, 1) * d;
    double dxc_cl = m.A(1, 0) * x + m.A(1, 1) * xc + m.Bw(1, 0) * r + m.Bw(1, 1) * d;
    double z_cl = m.Cz(0, 0) * x + m.Cz(0, 1) * xc + m.Dzw(0, 0) * r + m.Dzw(0, 1) * d;
    CHECK(std::fabs(dx_cl - dx_ref) <= 1e-12);
    CHECK(std::fabs(dxc_cl - dxc_ref) <= 1e-12);
    CHECK(std::fabs(z_cl - z_ref) <= 1e-12);
  }
}

TEST_CASE("closed-loop matrices stay affine in the scheduling variable") {
  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> dr(0.0, 9.0);
  std::uniform_real_distribution<double> dl(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    double r1 = dr(gen), r2 = dr(gen), lam = dl(gen);
    double rm = lam * r1 + (1.0 - lam) * r2;
    for (const AffineMat* m : {&clp.sys.A, &clp.sys.Bw, &clp.sys.Cz, &clp.sys.Dzw}) {
      Matrix lhs = m->eval({rm});
      Matrix rhs = lam * m->eval({r1}) + (1.0 - lam) * m->eval({r2});
      CHECK(lpvlab::matlib::frob_norm(lhs - rhs) <= 1e-12);
    }
  }
}

TEST_CASE("static and zero controllers interconnect consistently") {
  auto plant = example_plant();
  // pure static gain u = 2 uc: no controller states at all
  AffineLpvSS st;
  st.n_u = 1;
  st.n_y = 1;
  st.n_rho = 1;
  st.P = plant.P;
  st.A = AffineMat::constant(Matrix(0, 0), 1);
  st.Bu = AffineMat::constant(Matrix(0, 1), 1);
  st.Cy = AffineMat::constant(Matrix(1, 0), 1);
  st.Dyu = AffineMat::constant(make(1, 1, {2.0}), 1);
  st.Bw = AffineMat::constant(Matrix(0, 0), 1);
  st.Cz = AffineMat::constant(Matrix(0, 0), 1);
  st.Dzw = AffineMat::constant(Matrix(0, 0), 1);
  st.Dzu = AffineMat::constant(Matrix(0, 1), 1);
  st.Dyw = AffineMat::constant(Matrix(1, 0), 1);
  auto clp = interconnect(plant, st, error_feedback());
  REQUIRE(clp.sys.n_x == 1);
  // x' = -(1+rho) x + 2 (r - x) + d
  Matrix a = clp.sys.A.eval({3.0});
  CHECK(a(0, 0) == doctest::Approx(-6.0));
  Matrix b = clp.sys.Bw.eval({3.0});
  CHECK(b(0, 0) == doctest::Approx(2.0));
  CHECK(b(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("rho-dependent algebraic loops are rejected") {
  // Plant with Dyu(rho) feeding a controller with instantaneous Dyu creates
  // a scheduling-dependent loop matrix, which leaves the affine class.
  auto plant = example_plant();
  plant.Dyu = {{make(1, 1, {0.0}), make(1, 1, {1.0})}};
  CHECK_THROWS_AS(interconnect(plant, example_controller(), error_feedback()),
                  std::invalid_argument);
}

TEST_CASE("unknown wiring signal names are rejected") {
  auto w = error_feedback();
  w.uc_equations = {{{1.0, "nope"}}};
  CHECK_THROWS_AS(interconnect(example_plant(), example_controller(), w),
                  std::invalid_argument);
}

TEST_CASE("scheduling map evaluation, jacobian and nonlinear vector field") {
  auto mu = square_first_state();
  CHECK(mu.eval({3.0, 1.0})[0] == doctest::Approx(9.0));
  CHECK(mu.jacobian({3.0, 1.0})[0][0] == doctest::Approx(6.0));

  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  auto nl = substitute_scheduling(clp, mu);
  auto fx = nl.f({1.0, 0.0}, {0.0, 0.0});
  REQUIRE(fx.size() == 2);
  // rho = 1: x' = -(1+1+1) x = -3, xc' = -x = -1
  CHECK(fx[0] == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(fx[1] == doctest::Approx(-1.0).epsilon(1e-14));

  auto z = nl.output({1.0, 0.0}, {0.5, 0.0});
  CHECK(z[0] == doctest::Approx(-0.5).epsilon(1e-14));  // z = r - x
}

TEST_CASE("nonlinear field equals frozen LPV dynamics at the scheduled point") {
  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  auto nl = substitute_scheduling(clp, square_first_state());
  std::mt19937 gen(55);
  std::uniform_real_distribution<double> dx(-2.9, 2.9);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> xi = {dx(gen), dx(gen)};
    std::vector<double> w = {dx(gen) / 2.0, dx(gen)};
    auto rho = nl.scheduling(xi);
    auto m = eval_matrices(clp.sys, rho);
    std::vector<double> ref(2, 0.0);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) ref[i] += m.A(i, j) * xi[j];
      for (int j = 0; j < 2; ++j) ref[i] += m.Bw(i, j) * w[j];
    }
    auto fx = nl.f(xi, w);
    CHECK(std::fabs(fx[0] - ref[0]) <= 1e-12);
    CHECK(std::fabs(fx[1] - ref[1]) <= 1e-12);
  }
}

TEST_CASE("scheduling values outside the declared box are rejected when checked") {
  auto sys = interconnect(example_plant(), example_controller(), error_feedback()).sys;
  CHECK_THROWS_AS(eval_matrices(sys, {9.5}), std::domain_error);
  CHECK_THROWS_AS(eval_matrices(sys, {-0.5}), std::domain_error);
  CHECK_NOTHROW(eval_matrices(sys, {9.5}, false));
}

TEST_CASE("transfer function evaluation and realization oracles") {
  // first-order lag 1/(s+1)
  TransferFunction lag{{1.0}, {1.0, 1.0}};
  auto v = lag.eval(1.0);
  CHECK(v.real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v.imag() == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(lag.order() == 1);

  auto r = realize(lag);
  CHECK(r.A(0, 0) == doctest::Approx(-1.0));
  CHECK(r.B(0, 0) == doctest::Approx(1.0));
  CHECK(r.C(0, 0) == doctest::Approx(1.0));
  CHECK(r.D(0, 0) == doctest::Approx(0.0));

  // biproper 0.14 (s+1)/(s+1e-7): D = 0.14, residue via C
  TransferFunction we{{0.14, 0.14}, {1.0, 1e-7}};
  auto rw = realize(we);
  CHECK(rw.D(0, 0) == doctest::Approx(0.14).epsilon(1e-14));
  CHECK(rw.A(0, 0) == doctest::Approx(-1e-7).epsilon(1e-10));
  // frequency response: realization must agree with direct evaluation
  for (double w : {1e-4, 1e-2, 1.0, 1e2}) {
    auto direct = we.eval(w);
    std::complex<double> jw(0.0, w);
    std::complex<double> resp =
        rw.C(0, 0) * (1.0 / (jw - rw.A(0, 0))) * rw.B(0, 0) + rw.D(0, 0);
    CHECK(std::abs(resp - direct) <= 1e-12 * std::abs(direct));
  }

  TransferFunction improper{{1.0, 0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(improper.validate(), std::invalid_argument);
  TransferFunction zero_den{{1.0}, {0.0}};
  CHECK_THROWS_AS(zero_den.validate(), std::invalid_argument);
}

TEST_CASE("static gains realize as pure feedthrough") {
  auto r = realize(TransferFunction::gain(8.0));
  CHECK(r.A.rows == 0);
  CHECK(r.D(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("weight augmentation matches the frequency-domain series product") {
  auto clp = interconnect(example_plant(), example_controller(), error_feedback());
  TransferFunction w_r{{1.5}, {1.0}};
  TransferFunction w_d{{8.0}, {1.0}};
  TransferFunction w_e{{0.14, 0.14}, {1.0, 1e-7}};
  auto wl = augment_weights(clp, w_r, w_d, w_e);
  REQUIRE(wl.sys.n_x == 3);  // xi (2) + W_e state; static input weights add none
  REQUIRE(wl.sys.n_w == 2);
  REQUIRE(wl.sys.n_z == 1);

  const TransferFunction* win[2] = {&w_r, &w_d};
  for (double rho : {0.0, 4.5, 9.0}) {
    auto raw = lpvlab::freq::freeze(clp, {rho});
    auto wtd = lpvlab::freq::freeze(wl, {rho});
    for (int in = 0; in < 2; ++in) {
      for (int k = 0; k < 50; ++k) {
        double omega = std::pow(10.0, -4.0 + 7.0 * k / 49.0);
        auto g_raw = lpvlab::freq::response(raw, omega);
        auto g_wtd = lpvlab::freq::response(wtd, omega);
        REQUIRE(g_raw.has_value());
        REQUIRE(g_wtd.has_value());
        auto expect = w_e.eval(omega) * (*g_raw)(0, in) * win[in]->eval(omega);
        CHECK(std::abs((*g_wtd)(0, in) - expect) <= 1e-8 * (1.0 + std::abs(expect)));
      }
    }
  }
}

TEST_CASE("box vertex enumeration") {
  auto v = vertices({{0.0, 9.0}});
  REQUIRE(v.size() == 2);
  CHECK(v[0][0] == 0.0);
  CHECK(v[1][0] == 9.0);

  auto v2 = vertices({{-1.0, 1.0}, {2.0, 5.0}});
  REQUIRE(v2.size() == 4);
  CHECK(v2[0] == std::vector<double>{-1.0, 2.0});
  CHECK(v2[3] == std::vector<double>{1.0, 5.0});

  auto deg = vertices({{3.0, 3.0}, {0.0, 1.0}});
  REQUIRE(deg.size() == 2);  // degenerate axis contributes one value
}

TEST_CASE("model validation catches dimension mismatches") {
  auto p = example_plant();
  p.Bw = AffineMat::constant(Matrix(2, 2), 1);  // wrong row count
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  auto mu = square_first_state();
  mu.components[0][0].expo = {1, 2};  // exponent vector longer than n_x_in
  CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
}
