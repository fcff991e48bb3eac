#pragma once

#include <array>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "lpvlab/matlib.hpp"

// Affine LPV state-space models over a scheduling box, polynomial scheduling
// maps, plant/controller interconnection and weighting-filter augmentation.

namespace lpvlab::lpvmodel {

using matlib::Matrix;

using Box = std::vector<std::array<double, 2>>;  // per-axis [lo, hi]

// M(rho) = coef[0] + sum_k rho_k * coef[k+1].
struct AffineMat {
  std::vector<Matrix> coef;

  Matrix eval(const std::vector<double>& rho) const;
  int rows() const { return coef.empty() ? 0 : coef.front().rows; }
  int cols() const { return coef.empty() ? 0 : coef.front().cols; }
  bool rho_constant() const;
  static AffineMat constant(Matrix m, int n_rho);
};

// General affine LPV system:
//   x'  = A x + Bw w + Bu u
//   z   = Cz x + Dzw w + Dzu u
//   y   = Cy x + Dyw w + Dyu u
// Controllers use the same shape with w/z absent (n_w = n_z = 0), reading
// u = u_c and emitting y = y_c.
struct AffineLpvSS {
  int n_x = 0, n_w = 0, n_u = 0, n_z = 0, n_y = 0, n_rho = 0;
  AffineMat A, Bw, Bu, Cz, Dzw, Dzu, Cy, Dyw, Dyu;
  Box P;

  void validate() const;  // throws std::invalid_argument on inconsistency
};

struct EvalMatrices {
  Matrix A, Bw, Bu, Cz, Dzw, Dzu, Cy, Dyw, Dyu;
};

// Evaluates all coefficient matrices at rho. Membership of rho in P is
// enforced to 1e-9 per axis unless `checked` is false.
EvalMatrices eval_matrices(const AffineLpvSS& m, const std::vector<double>& rho,
                           bool checked = true);

// rho_k = sum_t coef_t * prod_i x_i^{expo_t,i}.
struct SchedulingTerm {
  double coef = 0.0;
  std::vector<int> expo;
};

struct SchedulingMap {
  int n_x_in = 0;
  std::vector<std::vector<SchedulingTerm>> components;
  Box range;  // declared image box (the scheduling set)

  int n_rho() const { return static_cast<int>(components.size()); }
  std::vector<double> eval(const std::vector<double>& x) const;
  // d rho_k / d x_i, row per component.
  std::vector<std::vector<double>> jacobian(const std::vector<double>& x) const;
  void validate() const;
};

// Closed loop: states (x, x_c), inputs w, outputs z; u and y eliminated.
struct ClosedLoopLpv {
  AffineLpvSS sys;
  int n_plant_states = 0;
};

// Controller input equations u_c = sum of named w / y channels with signs,
// e.g. e = r - y. The controller output always drives u (u = y_c).
struct WiringTerm {
  double coef = 0.0;
  std::string signal;
};

struct Wiring {
  std::vector<std::string> w_names;  // exogenous channel names
  std::vector<std::string> y_names;  // plant output channel names
  std::vector<std::vector<WiringTerm>> uc_equations;  // one per u_c channel
};

// Eliminates u = y_c and u_c per the wiring. Throws std::invalid_argument on
// dimension mismatch, an ill-posed algebraic loop, a rho-dependent loop
// matrix, or any product that would leave the affine class.
ClosedLoopLpv interconnect(const AffineLpvSS& plant, const AffineLpvSS& controller,
                           const Wiring& wiring);

// Proper rational transfer function, descending powers of s.
struct TransferFunction {
  std::vector<double> num;
  std::vector<double> den;

  void validate() const;
  int order() const;  // denominator degree
  std::complex<double> eval(double omega) const;  // value at s = j*omega
  static TransferFunction gain(double k) { return {{k}, {1.0}}; }
};

// Controllable-canonical realization (A, B, C, D) of a SISO proper TF.
struct TfRealization {
  Matrix A, B, C, D;
};
TfRealization realize(const TransferFunction& tf);

// Series composition w_e o clp o diag(w_r, w_d); requires n_w = 2, n_z = 1.
// Weighted state is (xi, input-filter states, output-filter states).
ClosedLoopLpv augment_weights(const ClosedLoopLpv& clp, const TransferFunction& w_r,
                              const TransferFunction& w_d, const TransferFunction& w_e);

// The nonlinear closed loop xi' = A(mu(x)) xi + B(mu(x)) w.
struct NlClosedLoop {
  ClosedLoopLpv clp;
  SchedulingMap mu;

  std::vector<double> scheduling(const std::vector<double>& xi) const;
  std::vector<double> f(const std::vector<double>& xi, const std::vector<double>& w) const;
  std::vector<double> output(const std::vector<double>& xi, const std::vector<double>& w) const;
};

NlClosedLoop substitute_scheduling(const ClosedLoopLpv& clp, const SchedulingMap& mu);

// All corners of a box in lexicographic order; degenerate axes contribute a
// single value.
std::vector<std::vector<double>> vertices(const Box& p);

}  // namespace lpvlab::lpvmodel
