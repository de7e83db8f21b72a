#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "pumpline/bands.hpp"
#include "pumpline/common.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/transfer.hpp"

// In-gap Floquet solutions at the Fermi energy: psi_+- grow/decay like
// (-1)^n e^{+-kappa L} per period; their boundary data are the real
// eigenvectors of the one-period transfer matrix. The unit phases
// u_+- = W_+- / conj(W_+-) with W_+- = psi'(0) - i p psi(0) drive everything
// downstream: the winding of u_- along the cycle is the pumped integer, and
// the nodes of psi_- crossing x = 0 count the same integer directly.

namespace pumpline {

struct GapState {
  double s = 0.0;
  double kappa = 0.0;  // decay rate, > 0
  int n = 0;           // gap index
  // real boundary data at x = 0 (unit-norm eigenvectors of the monodromy)
  double psi_plus_0 = 0.0, psi_plus_prime_0 = 0.0;
  double psi_minus_0 = 0.0, psi_minus_prime_0 = 0.0;
  cplx u_plus, u_minus;  // unit-modulus phases
  cplx W_plus, W_minus;  // Wronskians W(e^{ipx}, psi_+-) at x = 0

  double lambda_plus() const { return (n % 2 == 0 ? 1.0 : -1.0) * std::exp(kappa); }
};

namespace detail {

struct EigPair {
  double lam;
  double v0, v1;  // unit-norm eigenvector
};

// Eigenvector of a real 2x2 with known real eigenvalue; picks the better
// conditioned of the two analytic forms.
inline EigPair eigenvector(const TransferMatrix& M, double lam) {
  const double w10 = M.b, w11 = lam - M.a;          // (b, lam - a)
  const double w20 = lam - M.d, w21 = M.c;          // (lam - d, c)
  const double n1 = std::hypot(w10, w11), n2 = std::hypot(w20, w21);
  EigPair e;
  e.lam = lam;
  if (n1 >= n2) {
    e.v0 = w10 / n1;
    e.v1 = w11 / n1;
  } else {
    e.v0 = w20 / n2;
    e.v1 = w21 / n2;
  }
  return e;
}

inline void default_sign(EigPair& e) {
  if (e.v0 < 0.0 || (e.v0 == 0.0 && e.v1 < 0.0)) {
    e.v0 = -e.v0;
    e.v1 = -e.v1;
  }
}

}  // namespace detail

// Gap solutions at (E_F, s). The eigenvector sign is fixed by psi(0) >= 0
// (falling back to psi'(0) > 0); when `prev` is given, the sign maximizing the
// overlap with the previous sample is taken instead (continuation gauge).
// u_+- do not depend on this choice.
inline GapState gap_solutions(const PotentialSpec& spec, const FermiPoint& fermi,
                              const GapCertificate& cert, double s, int n_steps = 2048,
                              const GapState* prev = nullptr) {
  if (std::abs(cert.E_F - fermi.E_F) > 1e-12 * std::max(1.0, std::abs(cert.E_F)))
    throw ConfigError("gap_solutions: certificate was issued for a different Fermi energy");
  const TransferMatrix M = monodromy(spec, fermi.E_F, s, n_steps);
  const double D = M.trace();
  if (std::abs(D) <= 2.0)
    throw GapClosureError("gap_solutions: E_F is not in a gap at s = " + std::to_string(s) +
                          " (|tr M| = " + std::to_string(std::abs(D)) + " <= 2)");
  const double sgn = D > 0.0 ? 1.0 : -1.0;
  const double root = std::sqrt(D * D - 4.0);
  const double lam_plus = 0.5 * (D + sgn * root);  // |lam_plus| = e^{kappa L} > 1
  const double lam_minus = 1.0 / lam_plus;         // stable complement (det M = 1)

  auto ep = detail::eigenvector(M, lam_plus);
  auto em = detail::eigenvector(M, lam_minus);
  for (auto* e : {&ep, &em}) {
    const State r = M.apply(State{e->v0, e->v1});
    const double resid = std::hypot(r.value - e->lam * e->v0, r.deriv - e->lam * e->v1);
    if (resid > 1e-8 * std::abs(e->lam))
      throw NumericalError("gap_solutions: eigenvector residual " + std::to_string(resid) +
                           " too large at s = " + std::to_string(s));
  }
  if (prev != nullptr) {
    if (ep.v0 * prev->psi_plus_0 + ep.v1 * prev->psi_plus_prime_0 < 0.0) {
      ep.v0 = -ep.v0;
      ep.v1 = -ep.v1;
    }
    if (em.v0 * prev->psi_minus_0 + em.v1 * prev->psi_minus_prime_0 < 0.0) {
      em.v0 = -em.v0;
      em.v1 = -em.v1;
    }
  } else {
    detail::default_sign(ep);
    detail::default_sign(em);
  }

  GapState g;
  g.s = s;
  g.n = cert.n;
  g.kappa = std::log(std::abs(lam_plus)) / spec.L;
  g.psi_plus_0 = ep.v0;
  g.psi_plus_prime_0 = ep.v1;
  g.psi_minus_0 = em.v0;
  g.psi_minus_prime_0 = em.v1;
  g.W_plus = cplx(ep.v1, 0.0) - cplx(0.0, fermi.p) * ep.v0;
  g.W_minus = cplx(em.v1, 0.0) - cplx(0.0, fermi.p) * em.v0;
  g.u_plus = g.W_plus / std::conj(g.W_plus);
  g.u_minus = g.W_minus / std::conj(g.W_minus);
  return g;
}

enum class GapBranch { Plus, Minus };

struct PhaseTrack {
  std::vector<double> s_samples;  // refined grid on [0, T], closed
  std::vector<cplx> u_values;     // unit complex per sample
  int winding = 0;
  double max_step_arg = 0.0;      // largest |phase increment| between samples
  double winding_residual = 0.0;  // |sum/2pi - winding| before rounding
};

// Samples u_plus or u_minus around the cycle, bisecting intervals until every
// phase step is below pi/2, then accumulates principal-branch increments.
inline PhaseTrack phase_loop(const PotentialSpec& spec, const FermiPoint& fermi,
                             const GapCertificate& cert, GapBranch which, int n_s_init = 64,
                             int n_steps = 2048) {
  if (n_s_init < 4) throw ConfigError("phase_loop: n_s_init must be >= 4");
  const auto u_at = [&](double s) -> cplx {
    const GapState g = gap_solutions(spec, fermi, cert, s, n_steps);
    return which == GapBranch::Minus ? g.u_minus : g.u_plus;
  };

  std::vector<double> ss(n_s_init + 1);
  std::vector<cplx> us(n_s_init + 1);
  for (int i = 0; i <= n_s_init; ++i) {
    ss[(std::size_t)i] = spec.T * (double)i / (double)n_s_init;
    us[(std::size_t)i] = u_at(ss[(std::size_t)i]);
  }

  constexpr std::size_t kMaxSamples = (std::size_t)1 << 20;
  bool refined = true;
  while (refined) {
    refined = false;
    std::vector<double> ns;
    std::vector<cplx> nu;
    ns.reserve(ss.size());
    nu.reserve(us.size());
    for (std::size_t i = 0; i + 1 < ss.size(); ++i) {
      ns.push_back(ss[i]);
      nu.push_back(us[i]);
      if (std::abs(phase_step(us[i], us[i + 1])) >= kPi / 2.0) {
        const double mid = 0.5 * (ss[i] + ss[i + 1]);
        ns.push_back(mid);
        nu.push_back(u_at(mid));
        refined = true;
      }
    }
    ns.push_back(ss.back());
    nu.push_back(us.back());
    if (ns.size() > kMaxSamples)
      throw NumericalError(
          "phase_loop: refinement exceeded 2^20 samples; the phase jumps suggest a closing gap");
    ss.swap(ns);
    us.swap(nu);
  }

  PhaseTrack track;
  track.s_samples = std::move(ss);
  track.u_values = std::move(us);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < track.u_values.size(); ++i) {
    const double d = phase_step(track.u_values[i], track.u_values[i + 1]);
    track.max_step_arg = std::max(track.max_step_arg, std::abs(d));
    sum += d;
  }
  const double w = sum / (2.0 * kPi);
  track.winding = (int)std::lround(w);
  track.winding_residual = std::abs(w - (double)track.winding);
  if (track.winding_residual > 1e-6)
    throw NumericalError("phase_loop: winding " + std::to_string(w) +
                         " does not round cleanly to an integer");
  if (std::abs(track.u_values.front() - track.u_values.back()) > 1e-8)
    throw NumericalError("phase_loop: loop failed to close over one period");
  return track;
}

// One row of a node trajectory: the zeros of psi_- inside the window at one s.
struct NodeSnapshot {
  double s = 0.0;
  std::vector<double> zeros;  // positions in [-window, window]
};

namespace detail {

// psi_-(x) for x in [lo, hi] sampled on a uniform grid, built from the
// boundary data at 0. Negative x uses the Floquet relation
// psi(x) = psi(x + L) / lambda_minus.
struct WindowSampler {
  const PotentialSpec& spec;
  double E;
  double s;
  State data0;       // (psi(0), psi'(0))
  double lam_minus;  // signed Floquet multiplier of the decaying branch
  int n_steps;

  double value(double x) const {
    if (x >= 0.0) return propagate(spec, E, s, 0.0, x, data0, n_steps).value;
    return propagate(spec, E, s, 0.0, x + spec.L, data0, n_steps).value / lam_minus;
  }

  std::vector<double> zeros_in(double window, int n_x) const {
    std::vector<double> zs;
    // sample [-window, 0) via [L - window, L) and [0, window] directly
    std::vector<double> xs((std::size_t)2 * n_x + 1);
    std::vector<double> vals((std::size_t)2 * n_x + 1);
    const auto right = sample_solution(spec, E, s, 0.0, window, data0, n_x, n_steps);
    const auto left = sample_solution(spec, E, s, spec.L - window, spec.L,
                                      propagate(spec, E, s, 0.0, spec.L - window, data0, n_steps),
                                      n_x, n_steps);
    for (int j = 0; j <= n_x; ++j) {
      xs[(std::size_t)j] = -window + window * (double)j / (double)n_x;
      vals[(std::size_t)j] = left[(std::size_t)j].value / lam_minus;
      xs[(std::size_t)(n_x + j)] = window * (double)j / (double)n_x;
      vals[(std::size_t)(n_x + j)] = right[(std::size_t)j].value;
    }
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      if (vals[i] == 0.0) {
        if (i > 0) zs.push_back(xs[i]);
        continue;
      }
      if (vals[i] * vals[i + 1] < 0.0) {
        double a = xs[i], b = xs[i + 1], fa = vals[i];
        for (int it = 0; it < 100 && (b - a) > 1e-10; ++it) {
          const double m = 0.5 * (a + b), fm = value(m);
          if ((fa <= 0.0) == (fm <= 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        zs.push_back(0.5 * (a + b));
      }
    }
    return zs;
  }
};

}  // namespace detail

// Zeros of psi_-(. , s) inside [-window, window] along the cycle; rows for
// plotting and for the crossing count cross-check.
inline std::vector<NodeSnapshot> node_trajectories(const PotentialSpec& spec,
                                                   const FermiPoint& fermi,
                                                   const GapCertificate& cert,
                                                   double window = -1.0, int n_s = 256,
                                                   int n_x = 256, int n_steps = 2048) {
  if (window <= 0.0) window = spec.L / 4.0;
  if (window >= spec.L / 2.0) throw ConfigError("node_trajectories: window must be < L/2");
  std::vector<NodeSnapshot> rows;
  rows.reserve((std::size_t)n_s + 1);
  GapState prev;
  for (int i = 0; i <= n_s; ++i) {
    const double s = spec.T * (double)i / (double)n_s;
    const GapState g = gap_solutions(spec, fermi, cert, s, n_steps, i > 0 ? &prev : nullptr);
    detail::WindowSampler sampler{spec, fermi.E_F, s, State{g.psi_minus_0, g.psi_minus_prime_0},
                                  (cert.n % 2 == 0 ? 1.0 : -1.0) * std::exp(-g.kappa * spec.L),
                                  n_steps};
    rows.push_back({s, sampler.zeros_in(window, n_x)});
    prev = g;
  }
  return rows;
}

// Signed count of nodes of psi_- crossing x = 0 over one cycle; rightward
// motion counts +1. A crossing happens where psi_-(0, s) = 0 (with the
// continuation gauge); its direction is -sign(d_s psi / d_x psi) there.
inline int node_count(const PotentialSpec& spec, const FermiPoint& fermi,
                      const GapCertificate& cert, double window = -1.0, int n_s = 256,
                      int n_steps = 2048) {
  if (window <= 0.0) window = spec.L / 4.0;
  if (window >= spec.L / 2.0) throw ConfigError("node_count: window must be < L/2");
  if (n_s < 32) throw ConfigError("node_count: n_s must be >= 32");

  // psi_-(0, s) along the cycle with the continuation gauge
  std::vector<GapState> gs;
  gs.reserve((std::size_t)n_s + 1);
  for (int i = 0; i <= n_s; ++i) {
    const double s = spec.T * (double)i / (double)n_s;
    gs.push_back(gap_solutions(spec, fermi, cert, s, n_steps, i > 0 ? &gs.back() : nullptr));
  }

  int total = 0;
  for (int i = 0; i < n_s; ++i) {
    const double f0 = gs[(std::size_t)i].psi_minus_0;
    const double f1 = gs[(std::size_t)i + 1].psi_minus_0;
    if (f0 == 0.0)
      throw NumericalError("node_count: node sits exactly on a sample; change n_s");
    if (f0 * f1 >= 0.0) continue;

    // bisect the crossing in s, continuing the gauge from sample i
    double a = gs[(std::size_t)i].s, b = gs[(std::size_t)i + 1].s;
    GapState left = gs[(std::size_t)i];
    double fa = f0;
    GapState mid_state = left;
    for (int it = 0; it < 100 && (b - a) > 1e-10 * spec.T; ++it) {
      const double m = 0.5 * (a + b);
      mid_state = gap_solutions(spec, fermi, cert, m, n_steps, &left);
      if ((fa <= 0.0) == (mid_state.psi_minus_0 <= 0.0)) {
        a = m;
        fa = mid_state.psi_minus_0;
        left = mid_state;
      } else {
        b = m;
      }
    }
    const double s_star = 0.5 * (a + b);
    const GapState at = gap_solutions(spec, fermi, cert, s_star, n_steps, &left);
    const double dpsi_dx = at.psi_minus_prime_0;
    if (std::abs(dpsi_dx) < 1e-8)
      throw NumericalError("node_count: degenerate node at s = " + std::to_string(s_star) +
                           " (psi and psi' vanish together); refine or shift the grid");
    // d_s psi from a symmetric difference with the continued gauge
    const double ds = spec.T * 1e-6;
    const GapState gm = gap_solutions(spec, fermi, cert, s_star - ds, n_steps, &left);
    const GapState gp = gap_solutions(spec, fermi, cert, s_star + ds, n_steps, &left);
    const double dpsi_ds = (gp.psi_minus_0 - gm.psi_minus_0) / (2.0 * ds);
    if (dpsi_ds == 0.0)
      throw NumericalError("node_count: tangential crossing at s = " + std::to_string(s_star));
    total += (dpsi_ds / dpsi_dx) < 0.0 ? +1 : -1;
  }
  return total;
}

}  // namespace pumpline
