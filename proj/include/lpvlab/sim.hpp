#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lpvlab/lpvmodel.hpp"

// Adaptive Runge-Kutta integration of the nonlinear closed loop with dense
// output, and trajectory classification (convergence / limit cycle /
// divergence / scheduling-set violation).

namespace lpvlab::sim {

using lpvmodel::Box;
using lpvmodel::NlClosedLoop;

// Piecewise-constant input: value w0 until the first step time, then each
// step value from its time onward. Steps must be strictly increasing in time.
struct InputSignal {
  std::vector<double> w0;
  std::vector<std::pair<double, std::vector<double>>> steps;

  std::vector<double> eval(double t) const;
  static InputSignal constant(std::vector<double> w) { return {std::move(w), {}}; }
};

struct SimOptions {
  double atol = 1e-9;
  double rtol = 1e-7;
  double dt_out = 0.01;
};

struct Trajectory {
  std::vector<double> times;                    // uniform dt_out spacing from 0
  std::vector<std::vector<double>> states;      // xi per sample
  std::vector<std::vector<double>> outputs;     // z per sample
  std::vector<std::vector<double>> scheduling;  // mu(x) per sample
  InputSignal input;
  bool aborted = false;  // integrator stopped early (step underflow/non-finite)
};

// Dormand-Prince 5(4) with adaptive step control and quartic dense output
// sampled at dt_out. Local error per step <= atol + rtol*|xi|.
Trajectory integrate(const NlClosedLoop& nl, const std::vector<double>& xi0,
                     const InputSignal& w, double horizon, const SimOptions& opts);

// Same integrator, but streams each dense-output sample (t, state pointer)
// to `visit` instead of storing a Trajectory; `visit` may return false to
// stop early. Returns false iff the integration aborted (step underflow or
// non-finite state) before reaching the horizon or a visitor stop.
bool integrate_stream(const NlClosedLoop& nl, const std::vector<double>& xi0,
                      const InputSignal& w, double horizon, const SimOptions& opts,
                      const std::function<bool(double, const double*)>& visit);

enum class VerdictKind { Converged, LimitCycle, Diverged, SchedulingViolation };

const char* to_string(VerdictKind k);

struct TrajectoryVerdict {
  VerdictKind kind = VerdictKind::Converged;
  double steady_state_error = 0.0;   // Converged: max |z| at the final sample
  double peak_to_peak = 0.0;         // LimitCycle: max tail peak-to-peak over states
  double period_estimate = 0.0;      // LimitCycle: mean spacing of tail maxima
  double first_violation_time = 0.0; // SchedulingViolation
  bool low_confidence = false;       // neither tail criterion was clean
};

struct ClassifyOptions {
  double tail_fraction = 0.2;
  double converged_peak_to_peak = 1e-3;
  double period_rel_std = 0.05;
  double escape_bound = 1e3;
};

// Tail-statistics classification; when `p` is given, a scheduling sample
// outside the box preempts the other verdicts.
TrajectoryVerdict classify(const Trajectory& t, const ClassifyOptions& opts,
                           const std::optional<Box>& p = std::nullopt);

struct SchedulingCheck {
  bool inside = true;
  double first_violation_time = 0.0;
};

// Pointwise membership of the recorded scheduling samples in the box.
SchedulingCheck scheduling_in_set(const Trajectory& t, const Box& p);

}  // namespace lpvlab::sim
