#include "lpvlab/freq.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpvlab::freq {

LtiSS freeze(const ClosedLoopLpv& clp, const std::vector<double>& rho) {
  auto em = lpvmodel::eval_matrices(clp.sys, rho);
  return LtiSS{em.A, em.Bw, em.Cz, em.Dzw};
}

std::optional<matlib::ComplexMatrix> response(const LtiSS& sys, double omega) {
  auto res = matlib::complex_resolvent(sys.A, omega);
  if (!res) return std::nullopt;
  matlib::ComplexMatrix b(sys.B.rows, sys.B.cols), c(sys.C.rows, sys.C.cols);
  for (int i = 0; i < sys.B.rows; ++i)
    for (int j = 0; j < sys.B.cols; ++j) b(i, j) = sys.B(i, j);
  for (int i = 0; i < sys.C.rows; ++i)
    for (int j = 0; j < sys.C.cols; ++j) c(i, j) = sys.C(i, j);
  matlib::ComplexMatrix g = c * (*res * b);
  for (int i = 0; i < sys.D.rows; ++i)
    for (int j = 0; j < sys.D.cols; ++j) g(i, j) += sys.D(i, j);
  return g;
}

std::vector<std::optional<double>> magnitude_response(const LtiSS& sys, int input, int output,
                                                      const std::vector<double>& omegas) {
  if (input < 0 || input >= sys.B.cols || output < 0 || output >= sys.C.rows)
    throw std::invalid_argument("magnitude_response: channel out of range");
  std::vector<std::optional<double>> mags;
  mags.reserve(omegas.size());
  for (double w : omegas) {
    auto g = response(sys, w);
    if (!g) {
      mags.push_back(std::nullopt);
      continue;
    }
    double m = std::abs((*g)(output, input));
    mags.push_back(20.0 * std::log10(m));
  }
  return mags;
}

double dc_gain(const LtiSS& sys, int input, int output) {
  if (input < 0 || input >= sys.B.cols || output < 0 || output >= sys.C.rows)
    throw std::invalid_argument("dc_gain: channel out of range");
  auto inv_b = matlib::solve(sys.A, sys.B);
  if (inv_b) {
    double g = sys.D(output, input);
    for (int k = 0; k < sys.A.rows; ++k) g -= sys.C(output, k) * (*inv_b)(k, input);
    return g;
  }
  // Integrator channel: gain diverges; report the sign it diverges with.
  double sign = 1.0;
  for (double w = 1e-9; w <= 1e-3; w *= 10.0) {
    auto g = response(sys, w);
    if (g) {
      double re = (*g)(output, input).real();
      if (re != 0.0) {
        sign = re > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
  }
  return sign * std::numeric_limits<double>::infinity();
}

std::vector<double> log_grid(double omega_min, double omega_max, int n) {
  if (!(omega_min > 0.0) || !(omega_max > omega_min) || n < 2)
    throw std::invalid_argument("log_grid: need 0 < omega_min < omega_max and n >= 2");
  std::vector<double> w(n);
  double l0 = std::log10(omega_min), l1 = std::log10(omega_max);
  for (int i = 0; i < n; ++i) w[i] = std::pow(10.0, l0 + (l1 - l0) * i / (n - 1));
  w.front() = omega_min;
  w.back() = omega_max;
  return w;
}

}  // namespace lpvlab::freq
