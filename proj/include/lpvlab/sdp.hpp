#pragma once

#include <vector>

#include "lpvlab/matlib.hpp"

// Small dense SDP solver: minimize c'x subject to block-diagonal affine
// matrix inequalities F0 + sum_i x_i Fi >= 0. Primal-dual interior point
// with Nesterov-Todd scaling and a dense Schur-complement solve.

namespace lpvlab::sdp {

enum class Status { Optimal, Feasible, Infeasible, NumericalFailure };

const char* to_string(Status s);

struct LmiBlock {
  matlib::SymMatrix F0;
  std::vector<matlib::SymMatrix> Fi;  // one per decision variable
  bool strict = false;                // source inequality was strict; solver
                                      // shifts F0 by -strictness_margin*I
};

struct LmiProblem {
  int n_vars = 0;
  std::vector<double> c;  // empty or all-zero means pure feasibility
  std::vector<LmiBlock> blocks;
  double strictness_margin = 1e-6;

  bool is_feasibility() const;
  void validate() const;  // throws std::invalid_argument
};

struct SdpSolution {
  Status status = Status::NumericalFailure;
  std::vector<double> x;
  double objective_value = 0.0;
  // Smallest eigenvalue over all (unshifted) constraint blocks at x.
  double min_block_margin = 0.0;
  double rel_gap = 0.0;
  int iterations = 0;
  // Phase-2 objective value per iteration (monotonicity diagnostics).
  std::vector<double> objective_trace;
  // Max-margin evidence from phase 1 (t* < -1e-8 certifies infeasibility).
  double phase1_margin = 0.0;
};

// Phase 1 (max-margin from the slack-shifted origin) then phase 2.
SdpSolution solve(const LmiProblem& p);

// Phase 2 only, from a caller-supplied strictly interior point. Returns
// NumericalFailure if x0 is not interior for the shifted problem.
SdpSolution solve_from(const LmiProblem& p, const std::vector<double>& x0);

// min over blocks of lambda_min(F0 + sum x_i Fi), with the unshifted F0.
double verify_certificate(const LmiProblem& p, const std::vector<double>& x);

}  // namespace lpvlab::sdp
