#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lpvlab/lpvmodel.hpp"
#include "lpvlab/matlib.hpp"
#include "lpvlab/sdp.hpp"

// Quadratic stability and L2-gain certification at the scheduling-box
// vertices, the Q/Z decomposition of the Lyapunov derivative around shifted
// equilibria, and the gridded set computations with the alpha sweep.

namespace lpvlab::analysis {

using lpvmodel::Box;
using lpvmodel::ClosedLoopLpv;
using lpvmodel::NlClosedLoop;
using matlib::Matrix;
using matlib::SymMatrix;

struct QuadLyapunov {
  SymMatrix X;
};

struct StabilityResult {
  sdp::Status status = sdp::Status::NumericalFailure;
  QuadLyapunov lyap;          // valid when status == Feasible
  double margin = 0.0;        // min vertex-block margin of the certificate
  sdp::SdpSolution solution;  // solver diagnostics
};

// Feasibility of X >= I, A(v)'X + XA(v) < 0 at all vertices of P.
StabilityResult quadratic_stability(const ClosedLoopLpv& clp);

struct L2GainResult {
  sdp::Status status = sdp::Status::NumericalFailure;
  double gamma = 0.0;
  QuadLyapunov lyap;
  sdp::SdpSolution solution;
};

// Minimizes gamma subject to the bounded-real inequality
// [[A'X+XA, XB, C'], [B'X, -gI, D'], [C, D, -gI]] < 0 at all vertices,
// X > 0, via a single SDP with gamma as a decision variable.
L2GainResult l2gain(const ClosedLoopLpv& clp);

// Q(rho) = A(rho)'X + X A(rho). By default rho must lie in P; diagnostics may
// opt out with checked = false.
SymMatrix Q_of(const std::vector<double>& rho, const SymMatrix& x, const ClosedLoopLpv& clp,
               bool checked = true);

// Z(rho) = A(rho) xi_bar + B(rho) w_bar.
std::vector<double> Z_of(const std::vector<double>& rho, const std::vector<double>& xi_bar,
                         const std::vector<double>& w_bar, const ClosedLoopLpv& clp,
                         bool checked = true);

// d/dt of (xi - xi_bar)' X (xi - xi_bar) along the nonlinear flow with
// constant input w_bar; equals 2 (xi - xi_bar)' X f(xi, w_bar).
double vdot(const std::vector<double>& xi, const std::vector<double>& xi_bar,
            const std::vector<double>& w_bar, const SymMatrix& x, const NlClosedLoop& nl);

// Global maximum of the vdot quadratic over the xi directions sharing the
// plant-state slice: (X Z)'(-Q)^{-1}(X Z). Throws std::domain_error unless
// Q(mu(x)) is negative definite.
double vdot_max(const std::vector<double>& x_plant, const std::vector<double>& xi_bar,
                const std::vector<double>& w_bar, const SymMatrix& x, const NlClosedLoop& nl);

struct EquilibriumPoint {
  std::vector<double> xi_bar;
  std::vector<double> w_bar;
  std::vector<double> rho_bar;
  bool multiple_roots = false;  // distinct Newton seeds found distinct roots
};

// Solves f(xi, w_bar) = 0 by damped Newton from 8 deterministic seeds spread
// over the state box; residual <= 1e-10 required. Throws std::runtime_error
// when no seed converges.
EquilibriumPoint equilibrium(const std::vector<double>& w_bar, const NlClosedLoop& nl,
                             const Box& xi_box);

struct GridSpec {
  Box box;
  std::vector<int> res;  // cells per axis

  long total_cells() const;
  std::vector<double> cell_center(long idx) const;
  // Cell containing the point, or nullopt when outside the box.
  std::optional<long> cell_of(const std::vector<double>& p) const;
};

struct GridSet {
  GridSpec grid;
  std::vector<std::uint8_t> mask;  // one flag per cell

  long count() const;
  bool subset_of(const GridSet& other) const;  // cellwise, same grid required
};

// Cells whose center has vdot < -margin for the equilibrium of w_bar.
GridSet compute_S(const std::vector<double>& w_bar, const GridSpec& grid, const SymMatrix& x,
                  const NlClosedLoop& nl, double margin = 0.0);

// Intersection of compute_S over all w_bar in w_grid.
GridSet compute_Shat(const std::vector<std::vector<double>>& w_grid, const GridSpec& grid,
                     const SymMatrix& x, const NlClosedLoop& nl, double margin = 0.0);

// Cells containing the equilibrium of some w_bar in w_grid.
GridSet compute_XiBar(const std::vector<std::vector<double>>& w_grid, const GridSpec& grid,
                      const NlClosedLoop& nl);

struct SimProtocol {
  double horizon = 100.0;
  double atol = 1e-9;
  double rtol = 1e-7;
  double dt_out = 0.01;
};

struct ReachResult {
  GridSet set;
  long violation_cells = 0;  // trajectories that left the state box (or aborted)
};

// Union of cells visited by trajectories started at the equilibrium of each
// start point and driven by each constant input of w_grid; cell marking by
// linear interpolation between consecutive samples.
ReachResult compute_R(const std::vector<std::vector<double>>& w_starts,
                      const std::vector<std::vector<double>>& w_inputs, const GridSpec& grid,
                      const NlClosedLoop& nl, const SimProtocol& protocol);

struct AlphaSweepRow {
  double alpha = 0.0;
  long s_hat_cells = 0;
  long xi_bar_cells = 0;
  long r_cells = 0;
  bool r_subset_of_s_hat = false;
  long violation_cells = 0;
};

struct AlphaSweepSets {
  AlphaSweepRow row;
  GridSet s_hat, xi_bar, r;
};

struct SweepConfig {
  Box w_box;                       // full input box, scaled per alpha
  std::vector<int> w_points;       // grid points per input axis for S-hat
  std::vector<int> r_points;       // coarser point counts for the R protocol
  GridSpec xi_grid;
  SimProtocol protocol;
  double margin = 0.0;
};

// Rectangular point grid over box (points per axis, endpoints included).
std::vector<std::vector<double>> grid_points(const Box& box, const std::vector<int>& points);

AlphaSweepSets alpha_slice(double alpha, const SweepConfig& cfg, const SymMatrix& x,
                           const NlClosedLoop& nl);

std::vector<AlphaSweepRow> alpha_sweep(const std::vector<double>& alphas, const SweepConfig& cfg,
                                       const SymMatrix& x, const NlClosedLoop& nl);

// Runs fn(i) for i in [0, n) on up to LPVLAB_THREADS workers (default: hardware
// concurrency). Results must not depend on execution order.
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace lpvlab::analysis
