#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "pumpline/common.hpp"
#include "pumpline/potential.hpp"

// Fixed-step RK4 for -psi'' + V psi = E psi at frozen s, written as
// y' = [[0,1],[V-E,0]] y. The potential samples along the step grid are
// precomputed once (PotentialTable), so sweeping E at fixed s costs only
// arithmetic. One-period fundamental matrices (monodromy) carry an error
// estimate from a single step-halving comparison; Wronskian conservation
// (det = 1) is checked against it.

namespace pumpline {

struct State {
  double value = 0.0;
  double deriv = 0.0;
};

struct CState {
  cplx value{0.0, 0.0};
  cplx deriv{0.0, 0.0};
};

// V sampled at step endpoints and midpoints of a uniform n-step grid on
// [x0, x1]: node j = x0 + j*h/2, j = 0..2n.
struct PotentialTable {
  double x0 = 0.0, x1 = 0.0;
  int n_steps = 0;
  std::vector<double> v;  // size 2*n_steps + 1

  static PotentialTable build(const FrozenPotential& fp, double x0, double x1, int n_steps) {
    PotentialTable t;
    t.x0 = x0;
    t.x1 = x1;
    t.n_steps = n_steps;
    t.v.resize(2 * (std::size_t)n_steps + 1);
    const double half = 0.5 * (x1 - x0) / (double)n_steps;
    for (std::size_t j = 0; j < t.v.size(); ++j) t.v[j] = fp(x0 + half * (double)j);
    return t;
  }
};

namespace detail {

// 2x2 real fundamental matrix across the table's interval at energy E.
// Columns are the solutions with data (1,0) and (0,1).
inline std::array<double, 4> rk4_fundamental(const PotentialTable& tab, double E) {
  const int n = tab.n_steps;
  const double h = (tab.x1 - tab.x0) / (double)n;
  // y = [[y00, y01], [y10, y11]] ; rows: (psi ; psi'), columns: the two solutions
  double y00 = 1.0, y01 = 0.0, y10 = 0.0, y11 = 1.0;
  for (int i = 0; i < n; ++i) {
    const double q0 = tab.v[2 * (std::size_t)i] - E;
    const double qm = tab.v[2 * (std::size_t)i + 1] - E;
    const double q1 = tab.v[2 * (std::size_t)i + 2] - E;
    // k = A y with A = [[0,1],[q,0]]
    const double k1a0 = y10, k1a1 = q0 * y00;
    const double k1b0 = y11, k1b1 = q0 * y01;
    double ya0 = y00 + 0.5 * h * k1a0, ya1 = y10 + 0.5 * h * k1a1;
    double yb0 = y01 + 0.5 * h * k1b0, yb1 = y11 + 0.5 * h * k1b1;
    const double k2a0 = ya1, k2a1 = qm * ya0;
    const double k2b0 = yb1, k2b1 = qm * yb0;
    ya0 = y00 + 0.5 * h * k2a0;
    ya1 = y10 + 0.5 * h * k2a1;
    yb0 = y01 + 0.5 * h * k2b0;
    yb1 = y11 + 0.5 * h * k2b1;
    const double k3a0 = ya1, k3a1 = qm * ya0;
    const double k3b0 = yb1, k3b1 = qm * yb0;
    ya0 = y00 + h * k3a0;
    ya1 = y10 + h * k3a1;
    yb0 = y01 + h * k3b0;
    yb1 = y11 + h * k3b1;
    const double k4a0 = ya1, k4a1 = q1 * ya0;
    const double k4b0 = yb1, k4b1 = q1 * yb0;
    y00 += (h / 6.0) * (k1a0 + 2.0 * k2a0 + 2.0 * k3a0 + k4a0);
    y10 += (h / 6.0) * (k1a1 + 2.0 * k2a1 + 2.0 * k3a1 + k4a1);
    y01 += (h / 6.0) * (k1b0 + 2.0 * k2b0 + 2.0 * k3b0 + k4b0);
    y11 += (h / 6.0) * (k1b1 + 2.0 * k2b1 + 2.0 * k3b1 + k4b1);
  }
  return {y00, y01, y10, y11};
}

// Coarse table (every other node) for the step-halving comparison.
inline PotentialTable halve(const PotentialTable& tab) {
  PotentialTable c;
  c.x0 = tab.x0;
  c.x1 = tab.x1;
  c.n_steps = tab.n_steps / 2;
  c.v.resize(2 * (std::size_t)c.n_steps + 1);
  for (std::size_t j = 0; j < c.v.size(); ++j) c.v[j] = tab.v[2 * j];
  return c;
}

}  // namespace detail

struct TransferMatrix {
  // [[a, b], [c, d]] maps (psi(x0), psi'(x0)) to (psi(x0+L), psi'(x0+L)).
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double E = 0.0;
  double s = 0.0;
  double est_error = 0.0;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }

  State apply(const State& y) const { return {a * y.value + b * y.deriv, c * y.value + d * y.deriv}; }
};

// One-period transfer matrix at (E, s); est_error from comparing n_steps with
// n_steps/2 (RK4 is order 4, so the fine-grid error is ~ |diff| / 15).
inline TransferMatrix monodromy(const PotentialSpec& spec, double E, double s,
                                int n_steps = 2048) {
  if (n_steps < 16) throw ConfigError("monodromy: n_steps must be >= 16");
  const FrozenPotential fp = freeze_potential(spec, s);
  const PotentialTable tab = PotentialTable::build(fp, 0.0, spec.L, n_steps);
  const auto fine = detail::rk4_fundamental(tab, E);
  const auto coarse = detail::rk4_fundamental(detail::halve(tab), E);
  double diff = 0.0, scale = 0.0;
  for (int i = 0; i < 4; ++i) {
    diff = std::max(diff, std::abs(fine[i] - coarse[i]));
    scale = std::max(scale, std::abs(fine[i]));
  }
  TransferMatrix M;
  M.a = fine[0];
  M.b = fine[1];
  M.c = fine[2];
  M.d = fine[3];
  M.E = E;
  M.s = s;
  M.est_error = diff / 15.0 + 64.0 * 1e-16 * std::max(scale, 1.0);
  const double det_dev = std::abs(M.det() - 1.0);
  if (det_dev > 10.0 * M.est_error)
    throw NumericalError("monodromy: det deviates from 1 by " + std::to_string(det_dev) +
                         " (estimated error " + std::to_string(M.est_error) +
                         "); increase n_steps");
  return M;
}

inline double discriminant(const PotentialSpec& spec, double E, double s, int n_steps = 2048) {
  return monodromy(spec, E, s, n_steps).trace();
}

// Propagate real boundary data from x0 to x1 (x1 >= x0). The step count is
// n_steps_per_period scaled by the interval length. Accuracy ~ (p h)^4; keep
// p L / n_steps small (documented limit of the fixed-step scheme).
inline State propagate(const PotentialSpec& spec, double E, double s, double x0, double x1,
                       State init, int n_steps_per_period = 2048) {
  if (x1 < x0) throw ConfigError("propagate: requires x1 >= x0");
  if (!std::isfinite(init.value) || !std::isfinite(init.deriv))
    throw ConfigError("propagate: non-finite initial data");
  if (x1 == x0) return init;
  const FrozenPotential fp = freeze_potential(spec, s);
  const int n = std::max(1, (int)std::ceil((double)n_steps_per_period * (x1 - x0) / spec.L));
  const PotentialTable tab = PotentialTable::build(fp, x0, x1, n);
  const auto m = detail::rk4_fundamental(tab, E);
  return {m[0] * init.value + m[1] * init.deriv, m[2] * init.value + m[3] * init.deriv};
}

// Complex data as two real solves (real and imaginary parts).
inline CState propagate(const PotentialSpec& spec, double E, double s, double x0, double x1,
                        CState init, int n_steps_per_period = 2048) {
  const State re = propagate(spec, E, s, x0, x1, State{init.value.real(), init.deriv.real()},
                             n_steps_per_period);
  const State im = propagate(spec, E, s, x0, x1, State{init.value.imag(), init.deriv.imag()},
                             n_steps_per_period);
  return {cplx(re.value, im.value), cplx(re.deriv, im.deriv)};
}

// Values of the solution with data `init` at x0, recorded on the uniform grid
// x0 + j*(x1-x0)/n_record, j = 0..n_record. Used for node tracking and CSV dumps.
inline std::vector<State> sample_solution(const PotentialSpec& spec, double E, double s, double x0,
                                          double x1, State init, int n_record,
                                          int n_steps_per_period = 2048) {
  if (x1 < x0) throw ConfigError("sample_solution: requires x1 >= x0");
  if (n_record < 1) throw ConfigError("sample_solution: n_record must be >= 1");
  std::vector<State> out;
  out.reserve((std::size_t)n_record + 1);
  out.push_back(init);
  const FrozenPotential fp = freeze_potential(spec, s);
  const double seg = (x1 - x0) / (double)n_record;
  const int n_seg = std::max(1, (int)std::ceil((double)n_steps_per_period * seg / spec.L));
  State y = init;
  for (int j = 0; j < n_record; ++j) {
    const double a = x0 + seg * (double)j;
    const PotentialTable tab = PotentialTable::build(fp, a, a + seg, n_seg);
    const auto m = detail::rk4_fundamental(tab, E);
    y = {m[0] * y.value + m[1] * y.deriv, m[2] * y.value + m[3] * y.deriv};
    out.push_back(y);
  }
  return out;
}

}  // namespace pumpline
