#include "lpvlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "lpvlab/sim.hpp"

namespace lpvlab::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Symmetric basis E_k for the upper-triangle parameterization of X.
std::vector<std::pair<int, int>> upper_pairs(int n) {
  std::vector<std::pair<int, int>> p;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) p.emplace_back(i, j);
  return p;
}

SymMatrix basis_mat(int n, int i, int j) {
  SymMatrix e(n);
  e.set(i, j, 1.0);
  return e;
}

SymMatrix x_from_vars(int n, const std::vector<double>& x) {
  SymMatrix m(n);
  auto pairs = upper_pairs(n);
  for (size_t k = 0; k < pairs.size(); ++k) m.set(pairs[k].first, pairs[k].second, x[k]);
  return m;
}

std::vector<double> vars_from_x(const SymMatrix& m) {
  std::vector<double> v;
  for (const auto& [i, j] : upper_pairs(m.n)) v.push_back(m(i, j));
  return v;
}

// -(A'E + EA) for a symmetric basis element E.
SymMatrix stability_coeff(const Matrix& a, const SymMatrix& e) {
  Matrix ef = e.full();
  return SymMatrix::from(-1.0 * (transpose(a) * ef + ef * a));
}

sdp::LmiProblem stability_problem(const ClosedLoopLpv& clp) {
  const int n = clp.sys.n_x;
  auto pairs = upper_pairs(n);
  const int m = static_cast<int>(pairs.size());
  sdp::LmiProblem p;
  p.n_vars = m;

  sdp::LmiBlock norm;  // X - I >= 0
  norm.F0 = SymMatrix::from(-1.0 * Matrix::identity(n));
  for (const auto& [i, j] : pairs) norm.Fi.push_back(basis_mat(n, i, j));
  norm.strict = false;
  p.blocks.push_back(std::move(norm));

  for (const auto& v : lpvmodel::vertices(clp.sys.P)) {
    Matrix a = clp.sys.A.eval(v);
    sdp::LmiBlock blk;  // -(A'X + XA) > 0
    blk.F0 = SymMatrix(n);
    for (const auto& [i, j] : pairs) blk.Fi.push_back(stability_coeff(a, basis_mat(n, i, j)));
    blk.strict = true;
    p.blocks.push_back(std::move(blk));
  }
  return p;
}

// Negated bounded-real block at one vertex: F(X, gamma) = -M > 0 with
// M = [[A'X+XA, XB, C'], [B'X, -gI, D'], [C, D, -gI]].
sdp::LmiBlock brl_block(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d,
                        const std::vector<std::pair<int, int>>& pairs) {
  const int n = a.rows, nw = b.cols, nz = c.rows;
  const int nn = n + nw + nz;
  sdp::LmiBlock blk;
  Matrix f0(nn, nn);
  for (int i = 0; i < nz; ++i) {
    for (int j = 0; j < n; ++j) {
      f0(n + nw + i, j) = -c(i, j);
      f0(j, n + nw + i) = -c(i, j);
    }
    for (int j = 0; j < nw; ++j) {
      f0(n + nw + i, n + j) = -d(i, j);
      f0(n + j, n + nw + i) = -d(i, j);
    }
  }
  blk.F0 = SymMatrix::from(f0);
  for (const auto& [pi, pj] : pairs) {
    Matrix e = basis_mat(n, pi, pj).full();
    Matrix eb = e * b;
    Matrix fi(nn, nn);
    Matrix top = -1.0 * (transpose(a) * e + e * a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) fi(i, j) = top(i, j);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nw; ++j) {
        fi(i, n + j) = -eb(i, j);
        fi(n + j, i) = -eb(i, j);
      }
    blk.Fi.push_back(SymMatrix::from(fi));
  }
  Matrix fg(nn, nn);
  for (int i = n; i < nn; ++i) fg(i, i) = 1.0;
  blk.Fi.push_back(SymMatrix::from(fg));
  blk.strict = true;
  return blk;
}

sdp::LmiProblem brl_problem(const ClosedLoopLpv& clp) {
  const int n = clp.sys.n_x;
  auto pairs = upper_pairs(n);
  const int m = static_cast<int>(pairs.size()) + 1;  // X vars + gamma
  sdp::LmiProblem p;
  p.n_vars = m;
  p.c.assign(m, 0.0);
  p.c.back() = 1.0;

  sdp::LmiBlock pos;  // X >= 0 (iterates stay interior, so X ends up > 0)
  pos.F0 = SymMatrix(n);
  for (const auto& [i, j] : pairs) pos.Fi.push_back(basis_mat(n, i, j));
  pos.Fi.push_back(SymMatrix(n));
  pos.strict = false;
  p.blocks.push_back(std::move(pos));

  for (const auto& v : lpvmodel::vertices(clp.sys.P)) {
    auto em = lpvmodel::eval_matrices(clp.sys, v);
    p.blocks.push_back(brl_block(em.A, em.Bw, em.Cz, em.Dzw, pairs));
  }
  return p;
}

double vertex_margin(const ClosedLoopLpv& clp, const SymMatrix& x) {
  double m = kInf;
  for (const auto& v : lpvmodel::vertices(clp.sys.P)) {
    auto e = matlib::sym_eig(Q_of(v, x, clp));
    m = std::min(m, -e.values.back());  // margin of -(A'X+XA)
  }
  return m;
}

std::vector<double> mat_vec(const Matrix& a, const std::vector<double>& v) {
  std::vector<double> r(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) r[i] += a(i, j) * v[j];
  return r;
}

}  // namespace

void parallel_for(long n, const std::function<void(long)>& fn) {
  if (n <= 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("LPVLAB_THREADS")) {
    long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = static_cast<unsigned>(std::min<long>(cap, 256));
  }
  long workers = std::min<long>(hw, n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  long chunk = (n + workers - 1) / workers;
  for (long w = 0; w < workers; ++w) {
    long lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

StabilityResult quadratic_stability(const ClosedLoopLpv& clp) {
  auto p = stability_problem(clp);
  auto sol = sdp::solve(p);
  StabilityResult r;
  r.status = sol.status;
  r.solution = sol;
  if (sol.status == sdp::Status::Feasible || sol.status == sdp::Status::Optimal) {
    r.status = sdp::Status::Feasible;
    r.lyap.X = x_from_vars(clp.sys.n_x, sol.x);
    r.margin = vertex_margin(clp, r.lyap.X);
  }
  return r;
}

L2GainResult l2gain(const ClosedLoopLpv& clp) {
  auto p = brl_problem(clp);
  const int n = clp.sys.n_x;
  L2GainResult r;
  auto finish = [&](const sdp::SdpSolution& sol) {
    r.status = sol.status;
    r.solution = sol;
    if (sol.status == sdp::Status::Optimal || sol.status == sdp::Status::Feasible) {
      r.gamma = sol.x.back();
      r.lyap.X = x_from_vars(n, sol.x);
    }
  };

  auto sol = sdp::solve(p);
  if (sol.status != sdp::Status::NumericalFailure) {
    finish(sol);
    return r;
  }

  // Retry from an interior point built out of the vertex-stability
  // certificate: scale X so the Lyapunov blocks have a healthy margin, then
  // grow gamma until the bounded-real blocks are strictly interior too.
  auto st = quadratic_stability(clp);
  if (st.status != sdp::Status::Feasible) {
    finish(sol);
    return r;
  }
  SymMatrix x0 = st.lyap.X;
  double m0 = vertex_margin(clp, x0);
  if (m0 <= 0.0) {
    finish(sol);
    return r;
  }
  double scale = std::max(1.0, 1e-3 / m0);
  Matrix xs = scale * x0.full();
  std::vector<double> vars = vars_from_x(SymMatrix::from(xs));
  double gamma0 = 1.0;
  bool interior = false;
  for (int i = 0; i < 80; ++i) {
    auto cand = vars;
    cand.push_back(gamma0);
    if (sdp::verify_certificate(p, cand) > 2.0 * p.strictness_margin) {
      interior = true;
      vars = cand;
      break;
    }
    gamma0 *= 4.0;
  }
  if (!interior) {
    finish(sol);
    return r;
  }
  finish(sdp::solve_from(p, vars));
  return r;
}

SymMatrix Q_of(const std::vector<double>& rho, const SymMatrix& x, const ClosedLoopLpv& clp,
               bool checked) {
  Matrix a = lpvmodel::eval_matrices(clp.sys, rho, checked).A;
  Matrix xf = x.full();
  return SymMatrix::from(transpose(a) * xf + xf * a);
}

std::vector<double> Z_of(const std::vector<double>& rho, const std::vector<double>& xi_bar,
                         const std::vector<double>& w_bar, const ClosedLoopLpv& clp,
                         bool checked) {
  auto em = lpvmodel::eval_matrices(clp.sys, rho, checked);
  auto z = mat_vec(em.A, xi_bar);
  auto bw = mat_vec(em.Bw, w_bar);
  for (size_t i = 0; i < z.size(); ++i) z[i] += bw[i];
  return z;
}

double vdot(const std::vector<double>& xi, const std::vector<double>& xi_bar,
            const std::vector<double>& w_bar, const SymMatrix& x, const NlClosedLoop& nl) {
  auto fv = nl.f(xi, w_bar);
  double v = 0.0;
  const int n = x.n;
  for (int i = 0; i < n; ++i) {
    double xe = 0.0;
    for (int j = 0; j < n; ++j) xe += x(i, j) * fv[j];
    v += (xi[i] - xi_bar[i]) * xe;
  }
  return 2.0 * v;
}

double vdot_max(const std::vector<double>& x_plant, const std::vector<double>& xi_bar,
                const std::vector<double>& w_bar, const SymMatrix& x, const NlClosedLoop& nl) {
  auto rho = nl.mu.eval(x_plant);
  SymMatrix q = Q_of(rho, x, nl.clp, false);
  if (!matlib::is_neg_def(q)) throw std::domain_error("vdot_max: Q is not negative definite");
  auto z = Z_of(rho, xi_bar, w_bar, nl.clp, false);
  auto xz = mat_vec(x.full(), z);
  Matrix rhs(static_cast<int>(xz.size()), 1);
  for (size_t i = 0; i < xz.size(); ++i) rhs(i, 0) = xz[i];
  auto sol = matlib::solve(-1.0 * q.full(), rhs);
  if (!sol) throw std::domain_error("vdot_max: Q is numerically singular");
  double v = 0.0;
  for (size_t i = 0; i < xz.size(); ++i) v += xz[i] * (*sol)(i, 0);
  return v;
}

EquilibriumPoint equilibrium(const std::vector<double>& w_bar, const NlClosedLoop& nl,
                             const Box& xi_box) {
  const int n = nl.clp.sys.n_x;
  if (static_cast<int>(xi_box.size()) != n)
    throw std::invalid_argument("equilibrium: state box dimension mismatch");
  constexpr double frac[8] = {0.5, 0.25, 0.75, 0.1, 0.9, 0.35, 0.65, 0.05};

  auto residual = [&](const std::vector<double>& xi) {
    auto fv = nl.f(xi, w_bar);
    double r = 0.0;
    for (double v : fv) r = std::max(r, std::fabs(v));
    return r;
  };
  // Jacobian of f at xi: A(mu(x)) + sum_k (A_k xi + Bw_k w) d mu_k/d xi.
  auto jacobian = [&](const std::vector<double>& xi) {
    auto rho = nl.mu.eval(xi);
    Matrix j = nl.clp.sys.A.eval(rho);
    auto dmu = nl.mu.jacobian(xi);
    for (int k = 0; k < nl.mu.n_rho(); ++k) {
      auto col = mat_vec(nl.clp.sys.A.coef[k + 1], xi);
      auto bw = mat_vec(nl.clp.sys.Bw.coef[k + 1], w_bar);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < nl.mu.n_x_in; ++c) j(i, c) += (col[i] + bw[i]) * dmu[k][c];
    }
    return j;
  };

  std::vector<std::vector<double>> roots;
  std::vector<int> root_seed;
  for (int seed = 0; seed < 8; ++seed) {
    std::vector<double> xi(n);
    for (int i = 0; i < n; ++i) {
      double f = frac[(seed + i) % 8];
      xi[i] = xi_box[i][0] + f * (xi_box[i][1] - xi_box[i][0]);
    }
    bool ok = false;
    for (int it = 0; it < 100; ++it) {
      double r0 = residual(xi);
      if (r0 <= 1e-12) {
        ok = true;
        break;
      }
      auto fv = nl.f(xi, w_bar);
      Matrix rhs(n, 1);
      for (int i = 0; i < n; ++i) rhs(i, 0) = -fv[i];
      auto step = matlib::solve(jacobian(xi), rhs);
      if (!step) break;
      double lam = 1.0;
      bool moved = false;
      for (int half = 0; half < 30; ++half) {
        auto cand = xi;
        for (int i = 0; i < n; ++i) cand[i] += lam * (*step)(i, 0);
        if (residual(cand) < r0) {
          xi = cand;
          moved = true;
          break;
        }
        lam *= 0.5;
      }
      if (!moved) break;
    }
    if ((ok || residual(xi) <= 1e-10) && std::all_of(xi.begin(), xi.end(), [](double v) {
          return std::isfinite(v);
        })) {
      bool fresh = true;
      for (const auto& r : roots) {
        double d = 0.0, s = 0.0;
        for (int i = 0; i < n; ++i) {
          d = std::max(d, std::fabs(r[i] - xi[i]));
          s = std::max(s, std::fabs(r[i]));
        }
        if (d <= 1e-6 * (1.0 + s)) {
          fresh = false;
          break;
        }
      }
      if (fresh) {
        roots.push_back(xi);
        root_seed.push_back(seed);
      }
    }
  }
  if (roots.empty()) throw std::runtime_error("equilibrium: Newton did not converge from any seed");
  EquilibriumPoint pt;
  pt.xi_bar = roots.front();
  pt.w_bar = w_bar;
  pt.rho_bar = nl.mu.eval(pt.xi_bar);
  pt.multiple_roots = roots.size() > 1;
  return pt;
}

long GridSpec::total_cells() const {
  long t = 1;
  for (int r : res) t *= r;
  return t;
}

std::vector<double> GridSpec::cell_center(long idx) const {
  std::vector<double> c(box.size());
  for (int k = static_cast<int>(box.size()) - 1; k >= 0; --k) {
    long i = idx % res[k];
    idx /= res[k];
    c[k] = box[k][0] + (i + 0.5) * (box[k][1] - box[k][0]) / res[k];
  }
  return c;
}

std::optional<long> GridSpec::cell_of(const std::vector<double>& p) const {
  long idx = 0;
  for (size_t k = 0; k < box.size(); ++k) {
    if (p[k] < box[k][0] || p[k] > box[k][1]) return std::nullopt;
    double w = (box[k][1] - box[k][0]) / res[k];
    long i = w > 0.0 ? static_cast<long>((p[k] - box[k][0]) / w) : 0;
    i = std::clamp<long>(i, 0, res[k] - 1);
    idx = idx * res[k] + i;
  }
  return idx;
}

long GridSet::count() const {
  long c = 0;
  for (auto v : mask) c += v != 0;
  return c;
}

bool GridSet::subset_of(const GridSet& other) const {
  if (mask.size() != other.mask.size())
    throw std::invalid_argument("grid set: comparing masks of different grids");
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && !other.mask[i]) return false;
  return true;
}

namespace {

// Cellwise intersection of {vdot < -margin} over (equilibrium, input) pairs.
// The per-cell A(rho), B(rho) evaluation is hoisted out of the pair loop and
// the inner loop is allocation-free; one grid pass costs O(cells * pairs).
GridSet s_intersection(const std::vector<std::vector<double>>& eqs,
                       const std::vector<std::vector<double>>& w_grid, const GridSpec& grid,
                       const SymMatrix& x, const NlClosedLoop& nl, double margin) {
  const auto& sys = nl.clp.sys;
  const int n = sys.n_x, nw = sys.n_w;
  Matrix xf = x.full();
  GridSet acc{grid, std::vector<std::uint8_t>(grid.total_cells(), 1)};
  parallel_for(grid.total_cells(), [&](long i) {
    auto c = grid.cell_center(i);
    auto rho = nl.mu.eval(c);
    Matrix a = sys.A.eval(rho), b = sys.Bw.eval(rho);
    std::vector<double> ax(n, 0.0), f(n);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < n; ++j) ax[r] += a(r, j) * c[j];
    for (size_t k = 0; k < w_grid.size(); ++k) {
      const auto& w = w_grid[k];
      const auto& xb = eqs[k];
      for (int r = 0; r < n; ++r) {
        double v = ax[r];
        for (int j = 0; j < nw; ++j) v += b(r, j) * w[j];
        f[r] = v;
      }
      double vd = 0.0;
      for (int r = 0; r < n; ++r) {
        double xif = 0.0;
        for (int j = 0; j < n; ++j) xif += xf(r, j) * f[j];
        vd += (c[r] - xb[r]) * xif;
      }
      if (!(2.0 * vd < -margin)) {
        acc.mask[i] = 0;
        break;
      }
    }
  });
  return acc;
}

}  // namespace

GridSet compute_S(const std::vector<double>& w_bar, const GridSpec& grid, const SymMatrix& x,
                  const NlClosedLoop& nl, double margin) {
  auto eq = equilibrium(w_bar, nl, grid.box);
  return s_intersection({eq.xi_bar}, {w_bar}, grid, x, nl, margin);
}

GridSet compute_Shat(const std::vector<std::vector<double>>& w_grid, const GridSpec& grid,
                     const SymMatrix& x, const NlClosedLoop& nl, double margin) {
  std::vector<std::vector<double>> eqs;
  eqs.reserve(w_grid.size());
  for (const auto& w : w_grid) eqs.push_back(equilibrium(w, nl, grid.box).xi_bar);
  return s_intersection(eqs, w_grid, grid, x, nl, margin);
}

GridSet compute_XiBar(const std::vector<std::vector<double>>& w_grid, const GridSpec& grid,
                      const NlClosedLoop& nl) {
  GridSet s{grid, std::vector<std::uint8_t>(grid.total_cells(), 0)};
  for (const auto& w : w_grid) {
    auto eq = equilibrium(w, nl, grid.box);
    if (auto idx = grid.cell_of(eq.xi_bar)) s.mask[*idx] = 1;
  }
  return s;
}

ReachResult compute_R(const std::vector<std::vector<double>>& w_starts,
                      const std::vector<std::vector<double>>& w_inputs, const GridSpec& grid,
                      const NlClosedLoop& nl, const SimProtocol& protocol) {
  const long total = grid.total_cells();
  // equilibrium starts (serial: Newton is cheap and this keeps determinism
  // trivially independent of thread count)
  std::vector<std::vector<double>> starts;
  starts.reserve(w_starts.size());
  for (const auto& w : w_starts) starts.push_back(equilibrium(w, nl, grid.box).xi_bar);

  double min_width = kInf;
  for (size_t k = 0; k < grid.box.size(); ++k)
    min_width = std::min(min_width, (grid.box[k][1] - grid.box[k][0]) / grid.res[k]);

  const long n_tasks = static_cast<long>(starts.size()) * static_cast<long>(w_inputs.size());
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("LPVLAB_THREADS")) {
    long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = static_cast<unsigned>(std::min<long>(cap, 256));
  }
  long workers = std::max<long>(1, std::min<long>(hw, n_tasks));

  std::vector<std::vector<std::uint8_t>> masks(workers, std::vector<std::uint8_t>(total, 0));
  std::vector<long> escapes(workers, 0);
  sim::SimOptions opts{protocol.atol, protocol.rtol, protocol.dt_out};

  const int n = nl.clp.sys.n_x;
  auto run_task = [&](long task, std::vector<std::uint8_t>& mask, long& escaped) {
    const auto& xi0 = starts[task / w_inputs.size()];
    const auto& w = w_inputs[task % w_inputs.size()];
    bool out_seen = false;
    std::vector<double> prev(n), p(n);
    bool have_prev = false;
    auto mark = [&](const std::vector<double>& q) {
      if (auto idx = grid.cell_of(q)) mask[*idx] = 1;
      else out_seen = true;
    };
    // streamed samples: mark every cell the linear interpolant between
    // consecutive samples passes through (supersampled at half a cell width)
    auto visit = [&](double, const double* xi) {
      if (!have_prev) {
        std::copy(xi, xi + n, p.begin());
        mark(p);
        std::copy(xi, xi + n, prev.begin());
        have_prev = true;
        return true;
      }
      double dist = 0.0;
      for (int i = 0; i < n; ++i) dist = std::max(dist, std::fabs(xi[i] - prev[i]));
      int sub = 1 + static_cast<int>(dist / (0.5 * min_width));
      for (int j = 1; j <= sub; ++j) {
        double th = static_cast<double>(j) / sub;
        for (int i = 0; i < n; ++i) p[i] = prev[i] + th * (xi[i] - prev[i]);
        mark(p);
      }
      std::copy(xi, xi + n, prev.begin());
      return true;
    };
    if (!sim::integrate_stream(nl, xi0, sim::InputSignal::constant(w), protocol.horizon, opts,
                               visit))
      out_seen = true;  // aborted run: the state left any bounded region
    if (out_seen) ++escaped;
  };

  if (workers == 1) {
    for (long t = 0; t < n_tasks; ++t) run_task(t, masks[0], escapes[0]);
  } else {
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    long chunk = (n_tasks + workers - 1) / workers;
    for (long wk = 0; wk < workers; ++wk) {
      long lo = wk * chunk, hi = std::min(n_tasks, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, wk, lo, hi] {
        try {
          for (long t = lo; t < hi; ++t) run_task(t, masks[wk], escapes[wk]);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!err) err = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }

  ReachResult r;
  r.set = GridSet{grid, std::vector<std::uint8_t>(total, 0)};
  for (long w = 0; w < workers; ++w) {
    for (long i = 0; i < total; ++i) r.set.mask[i] |= masks[w][i];
    r.violation_cells += escapes[w];
  }
  return r;
}

std::vector<std::vector<double>> grid_points(const Box& box, const std::vector<int>& points) {
  if (box.size() != points.size())
    throw std::invalid_argument("grid_points: box and point counts differ in dimension");
  std::vector<std::vector<double>> axes;
  for (size_t k = 0; k < box.size(); ++k) {
    if (points[k] < 1) throw std::invalid_argument("grid_points: need at least one point per axis");
    std::vector<double> vals;
    if (points[k] == 1) {
      vals.push_back(0.5 * (box[k][0] + box[k][1]));
    } else {
      for (int i = 0; i < points[k]; ++i)
        vals.push_back(box[k][0] + i * (box[k][1] - box[k][0]) / (points[k] - 1));
    }
    axes.push_back(std::move(vals));
  }
  std::vector<std::vector<double>> pts{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(pts.size() * ax.size());
    for (const auto& p : pts)
      for (double v : ax) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  // drop exact duplicates (degenerate boxes collapse to far fewer points)
  std::vector<std::vector<double>> unique;
  for (auto& p : pts) {
    bool seen = false;
    for (const auto& u : unique)
      if (u == p) {
        seen = true;
        break;
      }
    if (!seen) unique.push_back(std::move(p));
  }
  return unique;
}

AlphaSweepSets alpha_slice(double alpha, const SweepConfig& cfg, const SymMatrix& x,
                           const NlClosedLoop& nl) {
  Box wa = cfg.w_box;
  for (auto& ax : wa) {
    ax[0] *= alpha;
    ax[1] *= alpha;
  }
  auto w_grid = grid_points(wa, cfg.w_points);
  auto r_starts = grid_points(wa, cfg.r_points);

  AlphaSweepSets out;
  out.s_hat = compute_Shat(w_grid, cfg.xi_grid, x, nl, cfg.margin);
  out.xi_bar = compute_XiBar(w_grid, cfg.xi_grid, nl);
  auto reach = compute_R(r_starts, r_starts, cfg.xi_grid, nl, cfg.protocol);
  out.r = reach.set;

  out.row.alpha = alpha;
  out.row.s_hat_cells = out.s_hat.count();
  out.row.xi_bar_cells = out.xi_bar.count();
  out.row.r_cells = out.r.count();
  out.row.violation_cells = reach.violation_cells;
  // R must lie inside S-hat; cells holding the equilibria themselves are
  // excluded since vdot -> 0 at an equilibrium makes its own cell undecidable
  // at any resolution.
  bool subset = true;
  for (size_t i = 0; i < out.r.mask.size(); ++i)
    if (out.r.mask[i] && !out.s_hat.mask[i] && !out.xi_bar.mask[i]) {
      subset = false;
      break;
    }
  out.row.r_subset_of_s_hat = subset && reach.violation_cells == 0;
  return out;
}

std::vector<AlphaSweepRow> alpha_sweep(const std::vector<double>& alphas, const SweepConfig& cfg,
                                       const SymMatrix& x, const NlClosedLoop& nl) {
  std::vector<AlphaSweepRow> rows;
  rows.reserve(alphas.size());
  for (double a : alphas) rows.push_back(alpha_slice(a, cfg, x, nl).row);
  return rows;
}

}  // namespace lpvlab::analysis
