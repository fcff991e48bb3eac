#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "lpvlab/freq.hpp"
#include "lpvlab/lpvmodel.hpp"

using namespace lpvlab;
using namespace lpvlab::freq;
using lpvmodel::AffineLpvSS;
using lpvmodel::AffineMat;
using matlib::Matrix;

namespace {

Matrix make(int r, int c, std::initializer_list<double> v) {
  Matrix m(r, c);
  std::copy(v.begin(), v.end(), m.a.begin());
  return m;
}

LtiSS lag() {  // 1/(s+1)
  return {make(1, 1, {-1.0}), make(1, 1, {1.0}), make(1, 1, {1.0}), make(1, 1, {0.0})};
}

lpvmodel::ClosedLoopLpv example_loop() {
  AffineLpvSS p;
  p.n_x = 1; p.n_w = 2; p.n_u = 1; p.n_z = 1; p.n_y = 1; p.n_rho = 1;
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
  AffineLpvSS c;
  c.n_x = 1; c.n_u = 1; c.n_y = 1; c.n_rho = 1;
  c.P = {{0.0, 9.0}};
  c.A = AffineMat::constant(make(1, 1, {0.0}), 1);
  c.Bu = AffineMat::constant(make(1, 1, {1.0}), 1);
  c.Cy = {{make(1, 1, {5.0}), make(1, 1, {2.0})}};
  c.Dyu = AffineMat::constant(make(1, 1, {1.0}), 1);
  c.Bw = AffineMat::constant(Matrix(1, 0), 1);
  c.Cz = AffineMat::constant(Matrix(0, 1), 1);
  c.Dzw = AffineMat::constant(Matrix(0, 0), 1);
  c.Dzu = AffineMat::constant(Matrix(0, 1), 1);
  c.Dyw = AffineMat::constant(Matrix(1, 0), 1);
  lpvmodel::Wiring w;
  w.w_names = {"r", "d"};
  w.y_names = {"y"};
  w.uc_equations = {{{1.0, "r"}, {-1.0, "y"}}};
  return lpvmodel::interconnect(p, c, w);
}

}  // namespace

TEST_CASE("first-order lag magnitudes at the corner and in the passband") {
  auto mags = magnitude_response(lag(), 0, 0, {1e-6, 1.0});
  REQUIRE(mags[0].has_value());
  REQUIRE(mags[1].has_value());
  CHECK(std::fabs(*mags[0]) <= 1e-6);                   // ~0 dB well below the pole
  CHECK(*mags[1] == doctest::Approx(-10.0 * std::log10(2.0)).epsilon(1e-10));
  CHECK(dc_gain(lag(), 0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pure feedthrough is flat at its gain") {
  LtiSS sys{make(1, 1, {-1.0}), make(1, 1, {1.0}), make(1, 1, {0.0}), make(1, 1, {2.0})};
  for (double w : {1e-4, 1.0, 1e3}) {
    auto m = magnitude_response(sys, 0, 0, {w});
    REQUIRE(m[0].has_value());
    CHECK(*m[0] == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
  }
  CHECK(dc_gain(sys, 0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("frozen closed-loop matrices at a vertex") {
  auto sys = freeze(example_loop(), {0.0});
  CHECK(sys.A(0, 0) == doctest::Approx(-2.0));
  CHECK(sys.A(0, 1) == doctest::Approx(5.0));
  CHECK(sys.A(1, 0) == doctest::Approx(-1.0));
  CHECK(sys.A(1, 1) == doctest::Approx(0.0));
  CHECK(sys.B(0, 0) == doctest::Approx(1.0));
  CHECK(sys.B(1, 0) == doctest::Approx(1.0));
  CHECK(sys.C(0, 0) == doctest::Approx(-1.0));
  CHECK(sys.D(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(freeze(example_loop(), {11.0}), std::domain_error);
}

TEST_CASE("both error channels vanish at low frequency for frozen dynamics") {
  auto clp = example_loop();
  for (double rho : {0.0, 4.5, 9.0}) {
    auto sys = freeze(clp, {rho});
    for (int input : {0, 1}) {
      auto m = magnitude_response(sys, input, 0, {1e-6});
      REQUIRE(m[0].has_value());
      CHECK(*m[0] <= -60.0);
    }
  }
}

TEST_CASE("dc gain agrees with the low-frequency magnitude") {
  // biproper weight 0.14 (s+1)/(s+1e-7)
  auto r = lpvmodel::realize({{0.14, 0.14}, {1.0, 1e-7}});
  LtiSS sys{r.A, r.B, r.C, r.D};
  double dc = dc_gain(sys, 0, 0);
  REQUIRE(std::isfinite(dc));
  CHECK(dc == doctest::Approx(0.14 / 1e-7).epsilon(1e-9));
  auto m = magnitude_response(sys, 0, 0, {1e-9});
  REQUIRE(m[0].has_value());
  CHECK(std::fabs(*m[0] - 20.0 * std::log10(std::fabs(dc))) <= 1e-3);
}

TEST_CASE("integrator channels report a signed infinite dc gain") {
  // 1/(s(s+1)): low-frequency real part approaches -1
  LtiSS pos{make(2, 2, {0, 1, 0, -1}), make(2, 1, {0, 1}), make(1, 2, {1, 0}),
            make(1, 1, {0.0})};
  double g = dc_gain(pos, 0, 0);
  CHECK(std::isinf(g));
  CHECK(g < 0.0);
  LtiSS neg{make(2, 2, {0, 1, 0, -1}), make(2, 1, {0, 1}), make(1, 2, {-1, 0}),
            make(1, 1, {0.0})};
  double h = dc_gain(neg, 0, 0);
  CHECK(std::isinf(h));
  CHECK(h > 0.0);
}

TEST_CASE("responses at opposite frequencies are conjugate") {
  auto clp = example_loop();
  auto sys = freeze(clp, {4.5});
  for (double w : {1e-3, 0.7, 12.0, 500.0}) {
    auto gp = response(sys, w);
    auto gn = response(sys, -w);
    REQUIRE(gp.has_value());
    REQUIRE(gn.has_value());
    for (int i = 0; i < 1; ++i)
      for (int j = 0; j < 2; ++j) {
        std::complex<double> a = (*gp)(i, j), b = (*gn)(i, j);
        CHECK(std::abs(b - std::conj(a)) <= 1e-14 * (1.0 + std::abs(a)));
      }
  }
}

TEST_CASE("imaginary-axis poles yield a missing magnitude sample") {
  LtiSS osc{make(2, 2, {0, 1, -1, 0}), make(2, 1, {0, 1}), make(1, 2, {1, 0}),
            make(1, 1, {0.0})};
  auto m = magnitude_response(osc, 0, 0, {0.5, 1.0, 2.0});
  CHECK(m[0].has_value());
  CHECK_FALSE(m[1].has_value());  // resonance exactly at omega = 1
  CHECK(m[2].has_value());
}

TEST_CASE("channel indices are validated") {
  CHECK_THROWS_AS(magnitude_response(lag(), 1, 0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(magnitude_response(lag(), 0, -1, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(dc_gain(lag(), 2, 0), std::invalid_argument);
}

TEST_CASE("logarithmic grids hit the endpoints with uniform ratios") {
  auto g = log_grid(1e-4, 1e3, 400);
  REQUIRE(g.size() == 400);
  CHECK(g.front() == 1e-4);
  CHECK(g.back() == 1e3);
  double ratio = g[1] / g[0];
  for (size_t k = 1; k < g.size(); ++k) {
    CHECK(g[k] > g[k - 1]);
    CHECK(g[k] / g[k - 1] == doctest::Approx(ratio).epsilon(1e-10));
  }
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(log_grid(1.0, 0.5, 10), std::invalid_argument);
  CHECK_THROWS_AS(log_grid(1.0, 2.0, 1), std::invalid_argument);
}
