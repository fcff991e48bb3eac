#include "lpvlab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpvlab::sim {

namespace {

// Right-hand side evaluator with reusable buffers; the integrator calls this
// thousands of times per run, so it avoids per-call allocation.
struct Rhs {
  const NlClosedLoop& nl;
  int n, nw, n_x_in;
  std::vector<double> rho;

  explicit Rhs(const NlClosedLoop& m)
      : nl(m), n(m.clp.sys.n_x), nw(m.clp.sys.n_w), n_x_in(m.mu.n_x_in),
        rho(static_cast<size_t>(m.mu.n_rho())) {}

  void scheduling(const double* y) {
    for (size_t k = 0; k < rho.size(); ++k) {
      double acc = 0.0;
      for (const auto& t : nl.mu.components[k]) {
        double v = t.coef;
        for (int i = 0; i < n_x_in; ++i)
          for (int e = t.expo[i]; e > 0; --e) v *= y[i];
        acc += v;
      }
      rho[k] = acc;
    }
  }

  void operator()(const double* y, const double* w, double* dx) {
    scheduling(y);
    const auto& ac = nl.clp.sys.A.coef;
    const auto& bc = nl.clp.sys.Bw.coef;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += ac[0](i, j) * y[j];
      for (int j = 0; j < nw; ++j) acc += bc[0](i, j) * w[j];
      dx[i] = acc;
    }
    for (size_t k = 0; k < rho.size(); ++k) {
      double rk = rho[k];
      const matlib::Matrix& ak = ac[k + 1];
      const matlib::Matrix& bk = bc[k + 1];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += ak(i, j) * y[j];
        for (int j = 0; j < nw; ++j) acc += bk(i, j) * w[j];
        dx[i] += rk * acc;
      }
    }
  }
};

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Returns false iff aborted (underflow / non-finite state).
bool run_core(const NlClosedLoop& nl, const std::vector<double>& xi0, const InputSignal& w,
              double horizon, const SimOptions& opts,
              const std::function<bool(double, const double*)>& sink) {
  if (!(horizon > 0.0)) throw std::invalid_argument("integrate: horizon must be positive");
  if (!(opts.atol > 0.0) || !(opts.rtol > 0.0) || !(opts.dt_out > 0.0))
    throw std::invalid_argument("integrate: tolerances must be positive");
  const int n = nl.clp.sys.n_x;
  if (static_cast<int>(xi0.size()) != n)
    throw std::invalid_argument("integrate: state size mismatch");
  if (static_cast<int>(w.w0.size()) != nl.clp.sys.n_w)
    throw std::invalid_argument("integrate: input size mismatch");
  for (size_t i = 0; i < w.steps.size(); ++i) {
    if (static_cast<int>(w.steps[i].second.size()) != nl.clp.sys.n_w)
      throw std::invalid_argument("integrate: input size mismatch");
    if (i > 0 && !(w.steps[i].first > w.steps[i - 1].first))
      throw std::invalid_argument("integrate: input step times must increase");
  }

  // Dormand-Prince 5(4) tableau.
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // dense-output coefficients
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  Rhs rhs(nl);
  const long n_out = std::lround(horizon / opts.dt_out);
  std::vector<double> y = xi0, ynew(n), ystage(n), u(n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);

  if (!sink(0.0, y.data())) return true;
  long next_out = 1;

  // segment boundaries at input discontinuities
  std::vector<double> cuts;
  for (const auto& s : w.steps)
    if (s.first > 0.0 && s.first < horizon) cuts.push_back(s.first);
  cuts.push_back(horizon);

  double t = 0.0;
  double h = std::min(1e-3, horizon);

  for (double tend : cuts) {
    std::vector<double> wseg = w.eval(t);
    rhs(y.data(), wseg.data(), k1.data());
    while (t < tend - 1e-14) {
      h = std::min(h, tend - t);
      if (h < 1e-12 * std::max(1.0, std::fabs(t))) return false;  // step-size underflow

      for (int i = 0; i < n; ++i) ystage[i] = y[i] + h * a21 * k1[i];
      rhs(ystage.data(), wseg.data(), k2.data());
      for (int i = 0; i < n; ++i) ystage[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      rhs(ystage.data(), wseg.data(), k3.data());
      for (int i = 0; i < n; ++i)
        ystage[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      rhs(ystage.data(), wseg.data(), k4.data());
      for (int i = 0; i < n; ++i)
        ystage[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      rhs(ystage.data(), wseg.data(), k5.data());
      for (int i = 0; i < n; ++i)
        ystage[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
      rhs(ystage.data(), wseg.data(), k6.data());
      for (int i = 0; i < n; ++i)
        ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      rhs(ynew.data(), wseg.data(), k7.data());
      if (!all_finite(ynew) || !all_finite(k7)) return false;

      double err = 0.0;
      for (int i = 0; i < n; ++i) {
        double e =
            h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double sc = opts.atol + opts.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / n);
      if (err <= 1.0) {
        // dense samples inside [t, t+h]
        while (next_out <= n_out) {
          double tout = next_out * opts.dt_out;
          if (tout > t + h + 1e-14) break;
          double th = std::clamp((tout - t) / h, 0.0, 1.0);
          for (int i = 0; i < n; ++i) {
            double dy = ynew[i] - y[i];
            double r1 = y[i];
            double r2 = dy;
            double r3 = h * k1[i] - dy;
            double r4 = dy - h * k7[i] - r3;
            double r5 = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                             d7 * k7[i]);
            u[i] = r1 + th * (r2 + (1.0 - th) * (r3 + th * (r4 + (1.0 - th) * r5)));
          }
          if (!sink(tout, u.data())) return true;
          ++next_out;
        }
        t += h;
        std::swap(y, ynew);
        std::swap(k1, k7);  // FSAL
      }
      double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 10.0;
      h *= std::clamp(fac, 0.2, 10.0);
    }
    // input change: k1 is recomputed at the top of the next segment
  }
  return true;
}

}  // namespace

std::vector<double> InputSignal::eval(double t) const {
  const std::vector<double>* v = &w0;
  for (const auto& s : steps) {
    if (t >= s.first) v = &s.second;
    else break;
  }
  return *v;
}

Trajectory integrate(const NlClosedLoop& nl, const std::vector<double>& xi0,
                     const InputSignal& w, double horizon, const SimOptions& opts) {
  Trajectory traj;
  traj.input = w;
  auto emit = [&](double t, const double* xi) {
    traj.times.push_back(t);
    traj.states.emplace_back(xi, xi + nl.clp.sys.n_x);
    auto wt = w.eval(t);
    traj.outputs.push_back(nl.output(traj.states.back(), wt));
    traj.scheduling.push_back(nl.scheduling(traj.states.back()));
    return true;
  };
  traj.aborted = !run_core(nl, xi0, w, horizon, opts, emit);
  return traj;
}

bool integrate_stream(const NlClosedLoop& nl, const std::vector<double>& xi0,
                      const InputSignal& w, double horizon, const SimOptions& opts,
                      const std::function<bool(double, const double*)>& visit) {
  return run_core(nl, xi0, w, horizon, opts, visit);
}

const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Converged: return "Converged";
    case VerdictKind::LimitCycle: return "LimitCycle";
    case VerdictKind::Diverged: return "Diverged";
    case VerdictKind::SchedulingViolation: return "SchedulingViolation";
  }
  return "Converged";
}

SchedulingCheck scheduling_in_set(const Trajectory& t, const Box& p) {
  for (size_t s = 0; s < t.scheduling.size(); ++s) {
    const auto& rho = t.scheduling[s];
    for (size_t k = 0; k < p.size() && k < rho.size(); ++k)
      if (rho[k] < p[k][0] || rho[k] > p[k][1]) return {false, t.times[s]};
  }
  return {true, 0.0};
}

TrajectoryVerdict classify(const Trajectory& t, const ClassifyOptions& opts,
                           const std::optional<Box>& p) {
  const size_t size = t.states.size();
  if (size < 5) throw std::invalid_argument("classify: trajectory shorter than the tail window");
  const int n = static_cast<int>(t.states.front().size());

  TrajectoryVerdict v;
  if (p) {
    auto check = scheduling_in_set(t, *p);
    if (!check.inside) {
      v.kind = VerdictKind::SchedulingViolation;
      v.first_violation_time = check.first_violation_time;
      return v;
    }
  }
  for (const auto& xi : t.states)
    for (double x : xi)
      if (!std::isfinite(x) || std::fabs(x) > opts.escape_bound) {
        v.kind = VerdictKind::Diverged;
        return v;
      }
  if (t.aborted) {
    v.kind = VerdictKind::Diverged;
    return v;
  }

  const size_t i0 = static_cast<size_t>(std::floor((1.0 - opts.tail_fraction) * (size - 1)));
  double pp_max = 0.0;
  int dominant = 0;
  std::vector<double> pps(n, 0.0);
  for (int s = 0; s < n; ++s) {
    double lo = t.states[i0][s], hi = lo;
    for (size_t i = i0; i < size; ++i) {
      lo = std::min(lo, t.states[i][s]);
      hi = std::max(hi, t.states[i][s]);
    }
    pps[s] = hi - lo;
    if (pps[s] > pp_max) {
      pp_max = pps[s];
      dominant = s;
    }
  }
  if (pp_max < opts.converged_peak_to_peak) {
    v.kind = VerdictKind::Converged;
    if (!t.outputs.empty() && !t.outputs.back().empty())
      for (double z : t.outputs.back())
        v.steady_state_error = std::max(v.steady_state_error, std::fabs(z));
    return v;
  }

  // tail maxima of the dominant state
  std::vector<double> max_times;
  for (size_t i = std::max(i0, size_t(1)); i + 1 < size; ++i) {
    double a = t.states[i - 1][dominant], b = t.states[i][dominant], c = t.states[i + 1][dominant];
    if (b > a && b >= c) max_times.push_back(t.times[i]);
  }
  std::vector<double> spacing;
  for (size_t i = 1; i < max_times.size(); ++i) spacing.push_back(max_times[i] - max_times[i - 1]);
  double mean = 0.0, sd = 0.0;
  if (!spacing.empty()) {
    for (double s : spacing) mean += s;
    mean /= spacing.size();
    for (double s : spacing) sd += (s - mean) * (s - mean);
    sd = std::sqrt(sd / spacing.size());
  }
  v.kind = VerdictKind::LimitCycle;
  v.peak_to_peak = pp_max;
  v.period_estimate = mean;
  v.low_confidence = spacing.size() < 2 || (mean > 0.0 && sd / mean >= opts.period_rel_std);
  return v;
}

}  // namespace lpvlab::sim
