#pragma once

#include <optional>
#include <vector>

#include "lpvlab/lpvmodel.hpp"
#include "lpvlab/matlib.hpp"

// Frozen-scheduling LTI frequency response: magnitude curves and DC gains.

namespace lpvlab::freq {

using lpvmodel::ClosedLoopLpv;
using matlib::Matrix;

struct LtiSS {
  Matrix A, B, C, D;
};

// LTI system at a fixed scheduling value (rho must lie in P).
LtiSS freeze(const ClosedLoopLpv& clp, const std::vector<double>& rho);

// C (jwI - A)^-1 B + D at one frequency; nullopt at a resonance.
std::optional<matlib::ComplexMatrix> response(const LtiSS& sys, double omega);

// 20 log10 |response| of one channel; per-frequency nullopt on resonance.
std::vector<std::optional<double>> magnitude_response(const LtiSS& sys, int input, int output,
                                                      const std::vector<double>& omegas);

// -C A^-1 B + D at one channel; signed infinity when A is singular (sign
// taken from the response just above DC).
double dc_gain(const LtiSS& sys, int input, int output);

// Log-spaced frequency grid, endpoints included.
std::vector<double> log_grid(double omega_min, double omega_max, int n);

}  // namespace lpvlab::freq
