#include "lpvlab/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpvlab::sdp {

namespace {

using matlib::Matrix;
using matlib::SymMatrix;

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix symmetrize(const Matrix& m) {
  Matrix r = m;
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j) {
      double v = 0.5 * (m(i, j) + m(j, i));
      r(i, j) = v;
      r(j, i) = v;
    }
  return r;
}

double inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.a.size(); ++k) s += a.a[k] * b.a[k];
  return s;
}

// V diag(f(w)) V' from an eigendecomposition.
template <class Fn>
Matrix recompose(const matlib::EigResult& e, Fn f) {
  int n = e.vectors.rows;
  Matrix r(n, n);
  for (int k = 0; k < n; ++k) {
    double fk = f(e.values[k]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) += fk * e.vectors(i, k) * e.vectors(j, k);
  }
  return r;
}

double min_eig(const Matrix& m) {
  auto e = matlib::sym_eig(SymMatrix::from(m));
  if (!e.converged || e.values.empty()) return -kInf;
  return e.values.front();
}

// Nesterov-Todd scaling point inverse: S^-1/2 (S^1/2 Y S^1/2)^1/2 S^-1/2.
std::optional<Matrix> nt_winv(const Matrix& s, const Matrix& y) {
  if (!s.finite() || !y.finite()) return std::nullopt;
  auto es = matlib::sym_eig(SymMatrix::from(s));
  if (!es.converged || es.values.front() <= 0.0) return std::nullopt;
  Matrix sh = recompose(es, [](double w) { return std::sqrt(w); });
  Matrix shi = recompose(es, [](double w) { return 1.0 / std::sqrt(w); });
  auto em = matlib::sym_eig(SymMatrix::from(sh * y * sh));
  if (!em.converged || em.values.front() <= 0.0) return std::nullopt;
  Matrix mh = recompose(em, [](double w) { return std::sqrt(w); });
  return symmetrize(shi * mh * shi);
}

// Solve L X = B with L lower triangular.
Matrix forward_solve(const Matrix& l, const Matrix& b) {
  Matrix x(b.rows, b.cols);
  for (int c = 0; c < b.cols; ++c)
    for (int i = 0; i < b.rows; ++i) {
      double v = b(i, c);
      for (int k = 0; k < i; ++k) v -= l(i, k) * x(k, c);
      x(i, c) = v / l(i, i);
    }
  return x;
}

// Solve L L' z = r for a vector r.
std::vector<double> chol_solve(const Matrix& l, const std::vector<double>& r) {
  int n = l.rows;
  std::vector<double> y(n), z(n);
  for (int i = 0; i < n; ++i) {
    double v = r[i];
    for (int k = 0; k < i; ++k) v -= l(i, k) * y[k];
    y[i] = v / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = y[i];
    for (int k = i + 1; k < n; ++k) v -= l(k, i) * z[k];
    z[i] = v / l(i, i);
  }
  return z;
}

// Largest a in (0,1] with S + a dS > 0 (exact, via L^-1 dS L^-T).
double max_step(const Matrix& s, const Matrix& ds) {
  auto l = matlib::cholesky(SymMatrix::from(s));
  if (!l) return 0.0;
  Matrix z = forward_solve(*l, ds);
  Matrix a = symmetrize(forward_solve(*l, transpose(z)));
  if (!a.finite()) return 0.0;
  double lam = min_eig(a);
  if (lam == -kInf) return 0.0;
  return lam >= -1e-300 ? 1.0 : std::min(1.0, -1.0 / lam);
}

struct WorkBlock {
  Matrix F0;
  std::vector<Matrix> Fi;
};

Matrix eval_block(const WorkBlock& b, const std::vector<double>& x) {
  Matrix f = b.F0;
  for (size_t i = 0; i < b.Fi.size(); ++i)
    for (size_t k = 0; k < f.a.size(); ++k) f.a[k] += x[i] * b.Fi[i].a[k];
  return f;
}

double blocks_min_eig(const std::vector<WorkBlock>& blocks, const std::vector<double>& x) {
  double m = kInf;
  for (const auto& b : blocks) m = std::min(m, min_eig(eval_block(b, x)));
  return m;
}

struct IpmOut {
  enum Kind { Converged, Early, Stalled } kind = Stalled;
  std::vector<double> x;
  double obj = 0.0;
  double certgap = kInf;
  double naive = kInf;
  int iterations = 0;
  std::vector<double> trace;
};

// Primal-dual predictor-corrector on min c'x s.t. F0_b + sum x_i Fi_b >= 0.
// x0 must be strictly interior. early_index >= 0 stops once x[early_index]
// reaches early_target (used by the phase-1 margin maximization).
IpmOut run_ipm(const std::vector<double>& c, const std::vector<WorkBlock>& blocks,
               std::vector<double> x0, int maxit, int early_index, double early_target) {
  const int m = static_cast<int>(c.size());
  const int nb = static_cast<int>(blocks.size());
  IpmOut out;
  std::vector<double> x = std::move(x0);
  std::vector<Matrix> S, Y;
  int ntot = 0;
  for (const auto& b : blocks) {
    S.push_back(eval_block(b, x));
    Y.push_back(Matrix::identity(b.F0.rows));
    ntot += b.F0.rows;
  }
  double cnorm = 0.0;
  for (double v : c) cnorm += v * v;
  cnorm = std::sqrt(cnorm);

  double best_cert = kInf, best_naive = kInf;
  std::vector<double> best_x = x;
  int stall = 0, restarts = 0, it = 0;
  bool abort = false;

  while (it < maxit && !abort) {
    ++it;
    if (early_index >= 0 && x[early_index] >= early_target) {
      out.kind = IpmOut::Early;
      out.x = x;
      out.obj = 0.0;
      for (int i = 0; i < m; ++i) out.obj += c[i] * x[i];
      out.iterations = it;
      return out;
    }
    double gap = 0.0, obj = 0.0;
    for (int b = 0; b < nb; ++b) gap += inner(S[b], Y[b]);
    for (int i = 0; i < m; ++i) obj += c[i] * x[i];
    std::vector<double> rd(m);
    double rdnorm = 0.0, rdx = 0.0;
    for (int i = 0; i < m; ++i) {
      double v = c[i];
      for (int b = 0; b < nb; ++b) v -= inner(blocks[b].Fi[i], Y[b]);
      rd[i] = v;
      rdnorm += v * v;
      rdx += v * x[i];
    }
    rdnorm = std::sqrt(rdnorm);
    double certgap = (gap + std::fabs(rdx)) / (1.0 + std::fabs(obj));
    double naive = gap / (1.0 + std::fabs(obj));
    out.trace.push_back(obj);
    if (certgap < best_cert) {
      best_cert = certgap;
      best_naive = naive;
      best_x = x;
    }
    if (certgap <= 1e-7 && rdnorm <= 1e-7 * (1.0 + cnorm)) {
      out.kind = IpmOut::Converged;
      out.x = x;
      out.obj = obj;
      out.certgap = certgap;
      out.naive = naive;
      out.iterations = it;
      return out;
    }
    double mu = gap / ntot;

    std::vector<Matrix> Winv;
    bool scale_ok = true;
    for (int b = 0; b < nb; ++b) {
      auto w = nt_winv(S[b], Y[b]);
      if (!w) {
        scale_ok = false;
        break;
      }
      Winv.push_back(*w);
    }
    if (!scale_ok) stall = 3;
    if (stall >= 3) {
      if (restarts < 3) {
        ++restarts;
        stall = 0;
        x = best_x;
        for (int b = 0; b < nb; ++b) {
          S[b] = eval_block(blocks[b], x);
          Y[b] = Matrix::identity(blocks[b].F0.rows);
        }
        continue;
      }
      break;
    }

    // Schur complement M_ij = sum_b <Fi, Winv Fj Winv>.
    Matrix M(m, m);
    std::vector<std::vector<Matrix>> G(nb);
    for (int b = 0; b < nb; ++b) {
      G[b].reserve(m);
      for (int j = 0; j < m; ++j) G[b].push_back(symmetrize(Winv[b] * blocks[b].Fi[j] * Winv[b]));
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) M(i, j) += inner(blocks[b].Fi[i], G[b][j]);
    }
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) M(j, i) = M(i, j);
    double tr = 0.0;
    for (int i = 0; i < m; ++i) tr += M(i, i);
    double dreg = 1e-13 * tr / m;
    Matrix Mreg = M;
    for (int i = 0; i < m; ++i) Mreg(i, i) += dreg;
    auto Mf = matlib::cholesky(SymMatrix::from(Mreg));
    if (!Mf) {
      stall = 3;
      continue;
    }
    auto schur_solve = [&](const std::vector<double>& r) {
      std::vector<double> z = chol_solve(*Mf, r);
      std::vector<double> rr(m);
      for (int i = 0; i < m; ++i) {
        double v = r[i];
        for (int j = 0; j < m; ++j) v -= M(i, j) * z[j];
        rr[i] = v;
      }
      std::vector<double> dz = chol_solve(*Mf, rr);
      for (int i = 0; i < m; ++i) z[i] += dz[i];
      return z;
    };
    std::vector<Matrix> Sinv;
    bool inv_ok = true;
    for (int b = 0; b < nb; ++b) {
      auto si = matlib::solve(S[b], Matrix::identity(S[b].rows));
      if (!si) {
        inv_ok = false;
        break;
      }
      Sinv.push_back(symmetrize(*si));
    }
    if (!inv_ok) {
      stall = 3;
      continue;
    }

    auto newton = [&](double sig, const std::vector<Matrix>* dSa, const std::vector<Matrix>* dYa) {
      std::vector<double> rhs(m);
      std::vector<Matrix> Ts;
      Ts.reserve(nb);
      for (int b = 0; b < nb; ++b) {
        Matrix T = sig * mu * Sinv[b] - Y[b];
        if (dSa) T = T - symmetrize(Sinv[b] * (*dSa)[b] * (*dYa)[b]);
        Ts.push_back(T);
      }
      for (int i = 0; i < m; ++i) {
        double v = -rd[i];
        for (int b = 0; b < nb; ++b) v += inner(blocks[b].Fi[i], Ts[b]);
        rhs[i] = v;
      }
      std::vector<double> dx = schur_solve(rhs);
      std::vector<Matrix> dS, dY;
      for (int b = 0; b < nb; ++b) {
        Matrix ds(S[b].rows, S[b].cols);
        for (int i = 0; i < m; ++i)
          for (size_t k = 0; k < ds.a.size(); ++k) ds.a[k] += dx[i] * blocks[b].Fi[i].a[k];
        ds = symmetrize(ds);
        dS.push_back(ds);
        dY.push_back(symmetrize(Ts[b] - Winv[b] * ds * Winv[b]));
      }
      return std::tuple(dx, dS, dY);
    };

    auto [dxa, dSa, dYa] = newton(0.0, nullptr, nullptr);
    double apa = 1.0, ada = 1.0;
    for (int b = 0; b < nb; ++b) {
      apa = std::min(apa, max_step(S[b], dSa[b]));
      ada = std::min(ada, max_step(Y[b], dYa[b]));
    }
    double gap_aff = 0.0;
    for (int b = 0; b < nb; ++b) gap_aff += inner(S[b] + apa * dSa[b], Y[b] + ada * dYa[b]);
    double ratio = std::max(gap_aff, 0.0) / gap;
    double sigma = std::clamp(ratio * ratio * ratio, 1e-6, 1.0);

    auto [dx, dS, dY] = newton(sigma, &dSa, &dYa);
    double ap = 1.0, ad = 1.0;
    for (int b = 0; b < nb; ++b) {
      ap = std::min(ap, max_step(S[b], dS[b]));
      ad = std::min(ad, max_step(Y[b], dY[b]));
    }
    double tau = 0.9 + 0.09 * std::min(ap, ad);
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);
    if (std::max(ap, ad) < 1e-4) {
      ++stall;
      continue;
    }
    stall = 0;
    for (int i = 0; i < m; ++i) x[i] += ap * dx[i];
    for (int b = 0; b < nb; ++b) {
      S[b] = symmetrize(S[b] + ap * dS[b]);
      Y[b] = symmetrize(Y[b] + ad * dY[b]);
    }
  }

  out.kind = IpmOut::Stalled;
  out.x = best_x;
  out.obj = 0.0;
  for (int i = 0; i < m; ++i) out.obj += c[i] * best_x[i];
  out.certgap = best_cert;
  out.naive = best_naive;
  out.iterations = it;
  return out;
}

// Strict blocks get F0 - eps I; everything as full matrices.
std::vector<WorkBlock> shifted_blocks(const LmiProblem& p) {
  std::vector<WorkBlock> work;
  work.reserve(p.blocks.size());
  for (const auto& b : p.blocks) {
    WorkBlock w;
    w.F0 = b.F0.full();
    if (b.strict)
      for (int i = 0; i < w.F0.rows; ++i) w.F0(i, i) -= p.strictness_margin;
    for (const auto& fi : b.Fi) w.Fi.push_back(fi.full());
    work.push_back(std::move(w));
  }
  return work;
}

// Per-variable Frobenius equilibration; Fi <- Fi/s_i, so x_internal = s .* x.
std::vector<double> equilibrate(std::vector<WorkBlock>& work, int m) {
  std::vector<double> scale(m, 1.0);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (const auto& b : work) {
      double f = frob_norm(b.Fi[i]);
      s += f * f;
    }
    s = std::sqrt(s);
    scale[i] = s > 1e-150 ? s : 1.0;
  }
  for (auto& b : work)
    for (int i = 0; i < m; ++i) b.Fi[i] = (1.0 / scale[i]) * b.Fi[i];
  return scale;
}

void fill_solution(SdpSolution& sol, const LmiProblem& p, const std::vector<double>& x_int,
                   const std::vector<double>& scale) {
  int m = p.n_vars;
  sol.x.assign(m, 0.0);
  for (int i = 0; i < m; ++i) sol.x[i] = x_int[i] / scale[i];
  sol.objective_value = 0.0;
  if (!p.c.empty())
    for (int i = 0; i < m; ++i) sol.objective_value += p.c[i] * sol.x[i];
  sol.min_block_margin = verify_certificate(p, sol.x);
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Feasible: return "Feasible";
    case Status::Infeasible: return "Infeasible";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "NumericalFailure";
}

bool LmiProblem::is_feasibility() const {
  if (c.empty()) return true;
  for (double v : c)
    if (v != 0.0) return false;
  return true;
}

void LmiProblem::validate() const {
  if (n_vars < 1 || n_vars > 64) throw std::invalid_argument("sdp: n_vars must be in [1,64]");
  if (!c.empty() && static_cast<int>(c.size()) != n_vars)
    throw std::invalid_argument("sdp: objective length mismatch");
  if (blocks.empty()) throw std::invalid_argument("sdp: no constraint blocks");
  if (!(strictness_margin >= 0.0) || !std::isfinite(strictness_margin))
    throw std::invalid_argument("sdp: bad strictness margin");
  for (const auto& b : blocks) {
    int n = b.F0.n;
    if (n < 1 || n > 32) throw std::invalid_argument("sdp: block dimension must be in [1,32]");
    if (static_cast<int>(b.Fi.size()) != n_vars)
      throw std::invalid_argument("sdp: block coefficient count mismatch");
    for (const auto& fi : b.Fi)
      if (fi.n != n) throw std::invalid_argument("sdp: block coefficient dimension mismatch");
  }
}

double verify_certificate(const LmiProblem& p, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != p.n_vars)
    throw std::invalid_argument("sdp: certificate length mismatch");
  double m = kInf;
  for (const auto& b : p.blocks) {
    Matrix f = b.F0.full();
    for (int i = 0; i < p.n_vars; ++i) {
      Matrix fi = b.Fi[i].full();
      for (size_t k = 0; k < f.a.size(); ++k) f.a[k] += x[i] * fi.a[k];
    }
    m = std::min(m, min_eig(f));
  }
  return m;
}

SdpSolution solve(const LmiProblem& p) {
  p.validate();
  const int m = p.n_vars;
  const bool feas = p.is_feasibility();
  auto work = shifted_blocks(p);
  auto scale = equilibrate(work, m);

  // Phase 1: maximize the uniform margin t with F(x) - t I >= 0 in every
  // block, plus a cap t <= 1e3. Start from x = 0 shifted to be interior.
  std::vector<WorkBlock> b1 = work;
  for (auto& b : b1) {
    Matrix s = -1.0 * Matrix::identity(b.F0.rows);
    b.Fi.push_back(s);
  }
  WorkBlock cap;
  cap.F0 = Matrix(1, 1);
  cap.F0(0, 0) = 1e3;
  for (int i = 0; i < m; ++i) cap.Fi.push_back(Matrix(1, 1));
  Matrix capslack(1, 1);
  capslack(0, 0) = -1.0;
  cap.Fi.push_back(capslack);
  b1.push_back(cap);

  std::vector<double> c1(m + 1, 0.0);
  c1[m] = -1.0;
  double t0 = kInf;
  for (const auto& b : b1) t0 = std::min(t0, min_eig(b.F0));
  t0 -= 1.0;
  std::vector<double> x0(m + 1, 0.0);
  x0[m] = t0;

  auto r1 = run_ipm(c1, b1, x0, 200, m, feas ? 1.0 : 1e-3);
  double t = r1.x[m];
  std::vector<double> xu(r1.x.begin(), r1.x.begin() + m);

  SdpSolution sol;
  sol.phase1_margin = t;
  sol.iterations = r1.iterations;
  bool interior = t > 1e-10 && blocks_min_eig(work, xu) > 0.0;
  if (!interior) {
    fill_solution(sol, p, xu, scale);
    sol.rel_gap = r1.certgap;
    sol.status = (r1.kind == IpmOut::Converged && t < -1e-8) ? Status::Infeasible
                                                             : Status::NumericalFailure;
    return sol;
  }
  if (feas) {
    fill_solution(sol, p, xu, scale);
    sol.rel_gap = 0.0;
    sol.status = Status::Feasible;
    return sol;
  }

  // Phase 2: minimize the real objective from the interior point.
  std::vector<double> c2(m);
  for (int i = 0; i < m; ++i) c2[i] = p.c[i] / scale[i];
  auto r2 = run_ipm(c2, work, xu, 200, -1, 0.0);
  sol.iterations += r2.iterations;
  sol.objective_trace = r2.trace;
  sol.rel_gap = r2.certgap;
  fill_solution(sol, p, r2.x, scale);
  if (r2.kind == IpmOut::Converged)
    sol.status = Status::Optimal;
  else
    sol.status = r2.naive <= 1e-4 ? Status::Feasible : Status::NumericalFailure;
  return sol;
}

SdpSolution solve_from(const LmiProblem& p, const std::vector<double>& x0) {
  p.validate();
  if (static_cast<int>(x0.size()) != p.n_vars)
    throw std::invalid_argument("sdp: start point length mismatch");
  const int m = p.n_vars;
  auto work = shifted_blocks(p);
  auto scale = equilibrate(work, m);
  std::vector<double> xs(m);
  for (int i = 0; i < m; ++i) xs[i] = x0[i] * scale[i];

  SdpSolution sol;
  if (blocks_min_eig(work, xs) <= 0.0) {
    sol.status = Status::NumericalFailure;
    sol.x = x0;
    sol.min_block_margin = verify_certificate(p, x0);
    return sol;
  }
  if (p.is_feasibility()) {
    fill_solution(sol, p, xs, scale);
    sol.rel_gap = 0.0;
    sol.status = Status::Feasible;
    return sol;
  }
  std::vector<double> c2(m);
  for (int i = 0; i < m; ++i) c2[i] = p.c[i] / scale[i];
  auto r2 = run_ipm(c2, work, xs, 200, -1, 0.0);
  sol.iterations = r2.iterations;
  sol.objective_trace = r2.trace;
  sol.rel_gap = r2.certgap;
  fill_solution(sol, p, r2.x, scale);
  if (r2.kind == IpmOut::Converged)
    sol.status = Status::Optimal;
  else
    sol.status = r2.naive <= 1e-4 ? Status::Feasible : Status::NumericalFailure;
  return sol;
}

}  // namespace lpvlab::sdp
