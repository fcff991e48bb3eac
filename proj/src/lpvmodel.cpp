#include "lpvlab/lpvmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpvlab::lpvmodel {

namespace {

void place(Matrix& dst, int r0, int c0, const Matrix& src) {
  for (int i = 0; i < src.rows; ++i)
    for (int j = 0; j < src.cols; ++j) dst(r0 + i, c0 + j) = src(i, j);
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Matrix polynomial in rho of degree <= 2; used to detect when an
// interconnection leaves the affine class.
struct Poly {
  int n_rho = 0;
  Matrix c0;
  std::vector<Matrix> lin;   // n_rho entries
  std::vector<Matrix> quad;  // upper-triangle pairs (k <= l)

  static int quad_index(int n_rho, int k, int l) {
    return k * n_rho - k * (k - 1) / 2 + (l - k);
  }

  static Poly zero(int n_rho, int rows, int cols) {
    Poly p;
    p.n_rho = n_rho;
    p.c0 = Matrix(rows, cols);
    p.lin.assign(n_rho, Matrix(rows, cols));
    p.quad.assign(n_rho * (n_rho + 1) / 2, Matrix(rows, cols));
    return p;
  }

  static Poly from(const AffineMat& m, int n_rho) {
    Poly p = zero(n_rho, m.rows(), m.cols());
    p.c0 = m.coef.at(0);
    for (int k = 0; k < n_rho; ++k) p.lin[k] = m.coef.at(k + 1);
    return p;
  }

  static Poly constant(const Matrix& m, int n_rho) {
    Poly p = zero(n_rho, m.rows, m.cols);
    p.c0 = m;
    return p;
  }

  bool has_linear() const {
    return std::any_of(lin.begin(), lin.end(), [](const Matrix& m) { return max_abs(m) > 0.0; });
  }
  bool has_quadratic() const {
    return std::any_of(quad.begin(), quad.end(), [](const Matrix& m) { return max_abs(m) > 0.0; });
  }

  AffineMat to_affine() const {
    require(!has_quadratic(), "interconnect: closed loop is not affine in the scheduling variable");
    AffineMat m;
    m.coef.push_back(c0);
    for (const auto& l : lin) m.coef.push_back(l);
    return m;
  }
};

Poly operator+(const Poly& a, const Poly& b) {
  Poly r = a;
  r.c0 = r.c0 + b.c0;
  for (size_t k = 0; k < r.lin.size(); ++k) r.lin[k] = r.lin[k] + b.lin[k];
  for (size_t k = 0; k < r.quad.size(); ++k) r.quad[k] = r.quad[k] + b.quad[k];
  return r;
}

Poly operator*(const Poly& a, const Poly& b) {
  require(!(a.has_quadratic() && (b.has_linear() || b.has_quadratic())) &&
              !(b.has_quadratic() && (a.has_linear() || a.has_quadratic())),
          "interconnect: closed loop is not affine in the scheduling variable");
  Poly r = Poly::zero(a.n_rho, a.c0.rows, b.c0.cols);
  r.c0 = a.c0 * b.c0;
  for (int k = 0; k < a.n_rho; ++k) r.lin[k] = a.c0 * b.lin[k] + a.lin[k] * b.c0;
  for (size_t q = 0; q < r.quad.size(); ++q)
    r.quad[q] = a.c0 * b.quad[q] + a.quad[q] * b.c0;
  for (int k = 0; k < a.n_rho; ++k)
    for (int l = 0; l < a.n_rho; ++l) {
      Matrix term = a.lin[k] * b.lin[l];
      if (max_abs(term) == 0.0) continue;
      int q = Poly::quad_index(a.n_rho, std::min(k, l), std::max(k, l));
      r.quad[q] = r.quad[q] + term;
    }
  return r;
}

void check_affine_dims(const AffineMat& m, int rows, int cols, int n_rho, const char* name) {
  std::string msg = std::string("lpv model: inconsistent coefficients for ") + name;
  if (static_cast<int>(m.coef.size()) != n_rho + 1) throw std::invalid_argument(msg);
  for (const auto& c : m.coef)
    if (c.rows != rows || c.cols != cols) throw std::invalid_argument(msg);
}

double int_pow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

Matrix AffineMat::eval(const std::vector<double>& rho) const {
  Matrix r = coef.at(0);
  require(rho.size() + 1 == coef.size(), "affine matrix: scheduling dimension mismatch");
  for (size_t k = 0; k < rho.size(); ++k)
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += rho[k] * coef[k + 1].a[i];
  return r;
}

bool AffineMat::rho_constant() const {
  for (size_t k = 1; k < coef.size(); ++k)
    if (max_abs(coef[k]) > 0.0) return false;
  return true;
}

AffineMat AffineMat::constant(Matrix m, int n_rho) {
  AffineMat r;
  r.coef.push_back(std::move(m));
  for (int k = 0; k < n_rho; ++k) r.coef.emplace_back(r.coef.front().rows, r.coef.front().cols);
  return r;
}

void AffineLpvSS::validate() const {
  require(n_x >= 0 && n_w >= 0 && n_u >= 0 && n_z >= 0 && n_y >= 0, "lpv model: negative dimension");
  require(n_rho >= 0, "lpv model: negative scheduling dimension");
  require(static_cast<int>(P.size()) == n_rho, "lpv model: scheduling box dimension mismatch");
  for (const auto& ax : P)
    require(std::isfinite(ax[0]) && std::isfinite(ax[1]) && ax[0] <= ax[1],
            "lpv model: scheduling box axis is empty or unbounded");
  check_affine_dims(A, n_x, n_x, n_rho, "A");
  check_affine_dims(Bw, n_x, n_w, n_rho, "Bw");
  check_affine_dims(Bu, n_x, n_u, n_rho, "Bu");
  check_affine_dims(Cz, n_z, n_x, n_rho, "Cz");
  check_affine_dims(Dzw, n_z, n_w, n_rho, "Dzw");
  check_affine_dims(Dzu, n_z, n_u, n_rho, "Dzu");
  check_affine_dims(Cy, n_y, n_x, n_rho, "Cy");
  check_affine_dims(Dyw, n_y, n_w, n_rho, "Dyw");
  check_affine_dims(Dyu, n_y, n_u, n_rho, "Dyu");
}

EvalMatrices eval_matrices(const AffineLpvSS& m, const std::vector<double>& rho, bool checked) {
  require(static_cast<int>(rho.size()) == m.n_rho, "eval_matrices: scheduling dimension mismatch");
  if (checked) {
    for (int k = 0; k < m.n_rho; ++k)
      if (rho[k] < m.P[k][0] - 1e-9 || rho[k] > m.P[k][1] + 1e-9)
        throw std::domain_error("eval_matrices: scheduling value outside its box");
  }
  return {m.A.eval(rho),   m.Bw.eval(rho),  m.Bu.eval(rho),
          m.Cz.eval(rho),  m.Dzw.eval(rho), m.Dzu.eval(rho),
          m.Cy.eval(rho),  m.Dyw.eval(rho), m.Dyu.eval(rho)};
}

std::vector<double> SchedulingMap::eval(const std::vector<double>& x) const {
  require(static_cast<int>(x.size()) >= n_x_in, "scheduling map: state too short");
  std::vector<double> rho(components.size(), 0.0);
  for (size_t k = 0; k < components.size(); ++k)
    for (const auto& t : components[k]) {
      double v = t.coef;
      for (int i = 0; i < n_x_in; ++i) v *= int_pow(x[i], t.expo[i]);
      rho[k] += v;
    }
  return rho;
}

std::vector<std::vector<double>> SchedulingMap::jacobian(const std::vector<double>& x) const {
  require(static_cast<int>(x.size()) >= n_x_in, "scheduling map: state too short");
  std::vector<std::vector<double>> jac(components.size(), std::vector<double>(n_x_in, 0.0));
  for (size_t k = 0; k < components.size(); ++k)
    for (const auto& t : components[k])
      for (int i = 0; i < n_x_in; ++i) {
        if (t.expo[i] == 0) continue;
        double v = t.coef * t.expo[i] * int_pow(x[i], t.expo[i] - 1);
        for (int j = 0; j < n_x_in; ++j)
          if (j != i) v *= int_pow(x[j], t.expo[j]);
        jac[k][i] += v;
      }
  return jac;
}

void SchedulingMap::validate() const {
  require(n_x_in >= 1, "scheduling map: empty state block");
  require(!components.empty(), "scheduling map: no components");
  require(range.size() == components.size(), "scheduling map: image box dimension mismatch");
  for (const auto& comp : components) {
    require(!comp.empty(), "scheduling map: component has no terms");
    for (const auto& t : comp) {
      require(static_cast<int>(t.expo.size()) == n_x_in, "scheduling map: exponent length mismatch");
      for (int e : t.expo) require(e >= 0, "scheduling map: negative exponent");
    }
  }
}

ClosedLoopLpv interconnect(const AffineLpvSS& plant, const AffineLpvSS& controller,
                           const Wiring& wiring) {
  plant.validate();
  controller.validate();
  require(plant.n_rho == controller.n_rho, "interconnect: scheduling dimension mismatch");
  require(plant.n_u == controller.n_y, "interconnect: u and y_c dimensions differ");
  require(controller.n_u == static_cast<int>(wiring.uc_equations.size()),
          "interconnect: wiring must define every controller input");
  require(static_cast<int>(wiring.w_names.size()) == plant.n_w,
          "interconnect: exogenous channel names mismatch");
  require(static_cast<int>(wiring.y_names.size()) == plant.n_y,
          "interconnect: plant output channel names mismatch");
  const int nr = plant.n_rho;

  // u_c = Sw w + Sy y from the signal-name equations.
  Matrix Sw(controller.n_u, plant.n_w), Sy(controller.n_u, plant.n_y);
  for (size_t eq = 0; eq < wiring.uc_equations.size(); ++eq)
    for (const auto& term : wiring.uc_equations[eq]) {
      auto wi = std::find(wiring.w_names.begin(), wiring.w_names.end(), term.signal);
      auto yi = std::find(wiring.y_names.begin(), wiring.y_names.end(), term.signal);
      if (wi != wiring.w_names.end())
        Sw(static_cast<int>(eq), static_cast<int>(wi - wiring.w_names.begin())) += term.coef;
      else if (yi != wiring.y_names.end())
        Sy(static_cast<int>(eq), static_cast<int>(yi - wiring.y_names.begin())) += term.coef;
      else
        throw std::invalid_argument("interconnect: unknown signal name in wiring");
    }

  auto P = [nr](const AffineMat& m) { return Poly::from(m, nr); };
  Poly A = P(plant.A), Bw = P(plant.Bw), Bu = P(plant.Bu);
  Poly Cz = P(plant.Cz), Dzw = P(plant.Dzw), Dzu = P(plant.Dzu);
  Poly Cy = P(plant.Cy), Dyw = P(plant.Dyw), Dyu = P(plant.Dyu);
  Poly Ac = P(controller.A), Bc = P(controller.Bu), Cc = P(controller.Cy), Dc = P(controller.Dyu);
  Poly Swp = Poly::constant(Sw, nr), Syp = Poly::constant(Sy, nr);

  // y = L^-1 (Cy x + Dyu Cc xc + (Dyw + Dyu Dc Sw) w), L = I - Dyu Dc Sy.
  Poly L = Poly::constant(Matrix::identity(plant.n_y), nr) +
           Poly::constant(-1.0 * Matrix::identity(plant.n_y), nr) * (Dyu * Dc * Syp);
  require(!L.has_linear() && !L.has_quadratic(),
          "interconnect: algebraic loop matrix depends on the scheduling variable");
  auto Linv0 = matlib::solve(L.c0, Matrix::identity(plant.n_y));
  require(Linv0.has_value(), "interconnect: ill-posed algebraic loop");
  Poly Linv = Poly::constant(*Linv0, nr);

  Poly Yx = Linv * Cy;
  Poly Yxc = Linv * (Dyu * Cc);
  Poly Yw = Linv * (Dyw + Dyu * (Dc * Swp));

  Poly UCx = Syp * Yx, UCxc = Syp * Yxc, UCw = Swp + Syp * Yw;
  Poly Ux = Dc * UCx, Uxc = Cc + Dc * UCxc, Uw = Dc * UCw;

  AffineMat A11 = (A + Bu * Ux).to_affine();
  AffineMat A12 = (Bu * Uxc).to_affine();
  AffineMat A21 = (Bc * UCx).to_affine();
  AffineMat A22 = (Ac + Bc * UCxc).to_affine();
  AffineMat B1 = (Bw + Bu * Uw).to_affine();
  AffineMat B2 = (Bc * UCw).to_affine();
  AffineMat C1 = (Cz + Dzu * Ux).to_affine();
  AffineMat C2 = (Dzu * Uxc).to_affine();
  AffineMat D1 = (Dzw + Dzu * Uw).to_affine();

  const int nx = plant.n_x + controller.n_x;
  AffineLpvSS cl;
  cl.n_x = nx;
  cl.n_w = plant.n_w;
  cl.n_u = 0;
  cl.n_z = plant.n_z;
  cl.n_y = 0;
  cl.n_rho = nr;
  cl.P = plant.P;
  for (int k = 0; k <= nr; ++k) {
    Matrix a(nx, nx), b(nx, plant.n_w), c(plant.n_z, nx), d(plant.n_z, plant.n_w);
    place(a, 0, 0, A11.coef[k]);
    place(a, 0, plant.n_x, A12.coef[k]);
    place(a, plant.n_x, 0, A21.coef[k]);
    place(a, plant.n_x, plant.n_x, A22.coef[k]);
    place(b, 0, 0, B1.coef[k]);
    place(b, plant.n_x, 0, B2.coef[k]);
    place(c, 0, 0, C1.coef[k]);
    place(c, 0, plant.n_x, C2.coef[k]);
    d = D1.coef[k];
    cl.A.coef.push_back(a);
    cl.Bw.coef.push_back(b);
    cl.Cz.coef.push_back(c);
    cl.Dzw.coef.push_back(d);
    cl.Bu.coef.emplace_back(nx, 0);
    cl.Dzu.coef.emplace_back(plant.n_z, 0);
    cl.Cy.coef.emplace_back(0, nx);
    cl.Dyw.coef.emplace_back(0, plant.n_w);
    cl.Dyu.coef.emplace_back(0, 0);
  }
  cl.validate();
  return {cl, plant.n_x};
}

void TransferFunction::validate() const {
  require(!num.empty() && !den.empty(), "transfer function: empty coefficients");
  require(den.front() != 0.0, "transfer function: zero leading denominator coefficient");
  for (double v : num) require(std::isfinite(v), "transfer function: non-finite coefficient");
  for (double v : den) require(std::isfinite(v), "transfer function: non-finite coefficient");
  // effective degrees (ignore leading zeros of the numerator)
  size_t nz = 0;
  while (nz + 1 < num.size() && num[nz] == 0.0) ++nz;
  require(num.size() - nz <= den.size(), "transfer function: improper (numerator degree too high)");
}

int TransferFunction::order() const {
  return static_cast<int>(den.size()) - 1;
}

std::complex<double> TransferFunction::eval(double omega) const {
  std::complex<double> s(0.0, omega), n(0.0, 0.0), d(0.0, 0.0);
  for (double c : num) n = n * s + c;
  for (double c : den) d = d * s + c;
  return n / d;
}

TfRealization realize(const TransferFunction& tf) {
  tf.validate();
  const int n = tf.order();
  // normalized coefficients: den = s^n + d1 s^(n-1) + ... + dn
  std::vector<double> d(tf.den.begin(), tf.den.end());
  for (double& v : d) v /= tf.den.front();
  std::vector<double> num = tf.num;
  while (num.size() > 1 && num.front() == 0.0) num.erase(num.begin());
  std::vector<double> b(n + 1, 0.0);  // b0 s^n + ... + bn
  for (size_t i = 0; i < num.size(); ++i) b[n + 1 - num.size() + i] = num[i] / tf.den.front();

  TfRealization r;
  r.A = Matrix(n, n);
  r.B = Matrix(n, 1);
  r.C = Matrix(1, n);
  r.D = Matrix(1, 1);
  r.D(0, 0) = b[0];
  for (int i = 0; i + 1 < n; ++i) r.A(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) r.A(n - 1, j) = -d[n - j];
  if (n > 0) r.B(n - 1, 0) = 1.0;
  for (int j = 0; j < n; ++j) r.C(0, j) = b[n - j] - b[0] * d[n - j];
  return r;
}

ClosedLoopLpv augment_weights(const ClosedLoopLpv& clp, const TransferFunction& w_r,
                              const TransferFunction& w_d, const TransferFunction& w_e) {
  const AffineLpvSS& s = clp.sys;
  require(s.n_w == 2 && s.n_z == 1, "augment_weights: expects two inputs and one output");
  TfRealization rr = realize(w_r), rd = realize(w_d), re = realize(w_e);

  // block-diagonal input filter (w~ -> w)
  const int ni = rr.A.rows + rd.A.rows;
  Matrix Ai(ni, ni), Bi(ni, 2), Ci(2, ni), Di(2, 2);
  place(Ai, 0, 0, rr.A);
  place(Ai, rr.A.rows, rr.A.rows, rd.A);
  place(Bi, 0, 0, rr.B);
  place(Bi, rr.A.rows, 1, rd.B);
  place(Ci, 0, 0, rr.C);
  place(Ci, 1, rr.A.rows, rd.C);
  Di(0, 0) = rr.D(0, 0);
  Di(1, 1) = rd.D(0, 0);
  const int ne = re.A.rows;

  const int nxi = s.n_x, nr = s.n_rho;
  const int nx = nxi + ni + ne;
  AffineLpvSS aug;
  aug.n_x = nx;
  aug.n_w = 2;
  aug.n_u = 0;
  aug.n_z = 1;
  aug.n_y = 0;
  aug.n_rho = nr;
  aug.P = s.P;
  for (int k = 0; k <= nr; ++k) {
    const Matrix& Ak = s.A.coef[k];
    const Matrix& Bk = s.Bw.coef[k];
    const Matrix& Ck = s.Cz.coef[k];
    const Matrix& Dk = s.Dzw.coef[k];
    bool base = k == 0;
    Matrix a(nx, nx), b(nx, 2), c(1, nx), d(1, 2);
    place(a, 0, 0, Ak);
    place(a, 0, nxi, Bk * Ci);
    if (base) place(a, nxi, nxi, Ai);
    place(a, nxi + ni, 0, re.B * Ck);
    place(a, nxi + ni, nxi, re.B * (Dk * Ci));
    if (base) place(a, nxi + ni, nxi + ni, re.A);
    place(b, 0, 0, Bk * Di);
    if (base) place(b, nxi, 0, Bi);
    place(b, nxi + ni, 0, re.B * (Dk * Di));
    place(c, 0, 0, re.D * Ck);
    place(c, 0, nxi, re.D * (Dk * Ci));
    if (base) place(c, 0, nxi + ni, re.C);
    d = re.D * (Dk * Di);
    aug.A.coef.push_back(a);
    aug.Bw.coef.push_back(b);
    aug.Cz.coef.push_back(c);
    aug.Dzw.coef.push_back(d);
    aug.Bu.coef.emplace_back(nx, 0);
    aug.Dzu.coef.emplace_back(1, 0);
    aug.Cy.coef.emplace_back(0, nx);
    aug.Dyw.coef.emplace_back(0, 2);
    aug.Dyu.coef.emplace_back(0, 0);
  }
  aug.validate();
  return {aug, clp.n_plant_states};
}

std::vector<double> NlClosedLoop::scheduling(const std::vector<double>& xi) const {
  return mu.eval(xi);
}

std::vector<double> NlClosedLoop::f(const std::vector<double>& xi,
                                    const std::vector<double>& w) const {
  auto rho = mu.eval(xi);
  Matrix A = clp.sys.A.eval(rho), B = clp.sys.Bw.eval(rho);
  std::vector<double> dx(clp.sys.n_x, 0.0);
  for (int i = 0; i < clp.sys.n_x; ++i) {
    double v = 0.0;
    for (int j = 0; j < clp.sys.n_x; ++j) v += A(i, j) * xi[j];
    for (int j = 0; j < clp.sys.n_w; ++j) v += B(i, j) * w[j];
    dx[i] = v;
  }
  return dx;
}

std::vector<double> NlClosedLoop::output(const std::vector<double>& xi,
                                         const std::vector<double>& w) const {
  auto rho = mu.eval(xi);
  Matrix C = clp.sys.Cz.eval(rho), D = clp.sys.Dzw.eval(rho);
  std::vector<double> z(clp.sys.n_z, 0.0);
  for (int i = 0; i < clp.sys.n_z; ++i) {
    double v = 0.0;
    for (int j = 0; j < clp.sys.n_x; ++j) v += C(i, j) * xi[j];
    for (int j = 0; j < clp.sys.n_w; ++j) v += D(i, j) * w[j];
    z[i] = v;
  }
  return z;
}

NlClosedLoop substitute_scheduling(const ClosedLoopLpv& clp, const SchedulingMap& mu) {
  mu.validate();
  require(mu.n_x_in <= clp.n_plant_states, "substitute_scheduling: map must read the plant-state block");
  require(mu.n_rho() == clp.sys.n_rho, "substitute_scheduling: scheduling dimension mismatch");
  return {clp, mu};
}

std::vector<std::vector<double>> vertices(const Box& p) {
  std::vector<std::vector<double>> corners{{}};
  for (const auto& ax : p) {
    std::vector<double> vals{ax[0]};
    if (ax[1] != ax[0]) vals.push_back(ax[1]);
    std::vector<std::vector<double>> next;
    next.reserve(corners.size() * vals.size());
    for (const auto& c : corners)
      for (double v : vals) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    corners = std::move(next);
  }
  return corners;
}

}  // namespace lpvlab::lpvmodel
