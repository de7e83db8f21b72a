#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pumpline/bands.hpp"
#include "pumpline/chern.hpp"
#include "pumpline/common.hpp"
#include "pumpline/gapstates.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/scattering.hpp"

// Adiabatic transport from the scattering data: the cycle integral
// <Q_1> = (i / 2 pi) \oint (conj(r) dr + conj(t') dt'), its quantized limit
// -winding(u_-), the charge variance as a periodized double integral, and the
// assembly of the whole comparison chain into one report.
//
// Variance kernel: the real-line form sums over periodic images,
// sum_n 1/(x + nT)^2 = (pi/T)^2 / sin^2(pi x / T), which turns the prefactor
// (1/2pi)^2 into 1/(2T)^2 against the sin^2 kernel. That periodized form is
// what is implemented; an image-sum cross-check lives in the test suite.

namespace pumpline {

struct ChargeResult {
  double value = 0.0;
  double imag_residue = 0.0;      // |Im| of the raw accumulation (checked, then dropped)
  double quadrature_error = 0.0;  // step-halving estimate
};

// Trapezoid accumulation of (i/2pi)(conj(r) dr + conj(t') dt') over a closed
// loop given as n+1 samples with the endpoint repeated; n must be even so the
// step-halving estimate reuses the same samples.
inline ChargeResult pumped_charge(const std::vector<cplx>& r, const std::vector<cplx>& t_prime) {
  const std::size_t sz = r.size();
  if (sz < 5 || t_prime.size() != sz)
    throw ConfigError("pumped_charge: need matching sample arrays with at least 5 points");
  const std::size_t n = sz - 1;
  if (n % 2 != 0) throw ConfigError("pumped_charge: sample count minus one must be even");
  if (std::abs(r.front() - r.back()) > 1e-8 || std::abs(t_prime.front() - t_prime.back()) > 1e-8)
    throw ConfigError("pumped_charge: loop is not closed (first and last samples differ)");
  for (std::size_t i = 0; i + 1 < sz; ++i) {
    if (std::abs(r[i + 1] - r[i]) >= 0.1 || std::abs(t_prime[i + 1] - t_prime[i]) >= 0.1)
      throw NumericalError(
          "pumped_charge: amplitude step >= 0.1 between adjacent samples; use a denser s-grid");
  }

  const auto accumulate = [&](std::size_t stride) {
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i + stride < sz; i += stride) {
      const cplx rmid = 0.5 * (std::conj(r[i]) + std::conj(r[i + stride]));
      const cplx tmid = 0.5 * (std::conj(t_prime[i]) + std::conj(t_prime[i + stride]));
      acc += rmid * (r[i + stride] - r[i]) + tmid * (t_prime[i + stride] - t_prime[i]);
    }
    return cplx(0.0, 1.0) / (2.0 * kPi) * acc;
  };

  const cplx full = accumulate(1);
  const cplx half = accumulate(2);
  ChargeResult out;
  out.imag_residue = std::abs(full.imag());
  if (out.imag_residue > 1e-8)
    throw NumericalError("pumped_charge: imaginary residue " + std::to_string(out.imag_residue) +
                         " exceeds 1e-8");
  out.value = full.real();
  out.quadrature_error = std::abs(full.real() - half.real()) / 3.0;
  return out;
}

inline ChargeResult pumped_charge(const std::vector<ScatteringMatrix>& loop) {
  std::vector<cplx> r, tp;
  r.reserve(loop.size());
  tp.reserve(loop.size());
  for (const auto& S : loop) {
    r.push_back(S.r);
    tp.push_back(S.t_prime);
  }
  return pumped_charge(r, tp);
}

// Charge delivered to the lead when the S-matrix row only rotates by the
// phase u: minus the winding number.
inline int winding_charge(const PhaseTrack& track) { return -track.winding; }

// Periodized variance double integral on a uniform closed loop: even samples
// carry s, odd samples carry s' (midpoint-shifted), so s = s' never occurs.
inline double charge_variance(const std::vector<cplx>& r, const std::vector<cplx>& t_prime,
                              double T) {
  const std::size_t sz = r.size();
  if (sz < 5 || t_prime.size() != sz)
    throw ConfigError("charge_variance: need matching sample arrays with at least 5 points");
  const std::size_t n = sz - 1;
  if (n % 2 != 0) throw ConfigError("charge_variance: the uniform grid size must be even");
  if (std::abs(r.front() - r.back()) > 1e-8)
    throw ConfigError("charge_variance: loop is not closed");

  const std::size_t half = n / 2;
  const double h = 2.0 * T / (double)n;  // spacing of each staggered sub-grid
  double sum = 0.0;
  double max_step = 0.0;
  std::vector<double> prev_row;
  for (std::size_t a = 0; a < half; ++a) {
    const std::size_t i = 2 * a;  // s sample
    std::vector<double> row(half);
    for (std::size_t b = 0; b < half; ++b) {
      const std::size_t j = 2 * b + 1;  // s' sample
      const double overlap =
          std::abs(r[i] * std::conj(r[j]) + t_prime[i] * std::conj(t_prime[j]));
      const double g = 1.0 - overlap * overlap;
      const double x = ((double)i - (double)j) / (double)n;  // (s - s') / T
      const double ker = 1.0 / sqr(std::sin(kPi * x));
      row[b] = g;
      sum += g * ker;
      if (b > 0) max_step = std::max(max_step, std::abs(row[b] - row[b - 1]));
    }
    if (!prev_row.empty())
      for (std::size_t b = 0; b < half; ++b)
        max_step = std::max(max_step, std::abs(row[b] - prev_row[b]));
    prev_row = std::move(row);
  }
  if (max_step > 0.5)
    throw NumericalError(
        "charge_variance: integrand varies by more than 0.5 per cell; use a denser s-grid");
  return sqr(1.0 / (2.0 * T)) * sum * h * h;
}

inline double charge_variance(const std::vector<ScatteringMatrix>& loop, double T) {
  std::vector<cplx> r, tp;
  r.reserve(loop.size());
  tp.reserve(loop.size());
  for (const auto& S : loop) {
    r.push_back(S.r);
    tp.push_back(S.t_prime);
  }
  return charge_variance(r, tp, T);
}

// ---- the comparison chain ---------------------------------------------------

struct Grids {
  int n_s = 512;     // cycle grid for certification, pump loops and variance (even)
  int N_k = 32;      // Chern grid
  int N_s = 32;
  int M_pw = 12;     // plane-wave cutoff
  int n_steps = 2048;
};

struct PumpReport {
  double E_F = 0.0;
  int n_filled = 0;
  int gap_index = 0;
  double gap_margin = 0.0;

  std::vector<int> chern_per_band;
  int chern_total = 0;
  int node_count = 0;
  int winding_u_minus = 0;
  int winding_charge = 0;  // = -winding_u_minus

  std::vector<std::pair<int, double>> Q1_of_N;
  std::vector<std::pair<int, double>> varQ1_of_N;

  double kappa_min_L = 0.0;
  double convergence_rate = 0.0;  // fitted decay rate of max_s |r_N + u_-|
  double rate_rel_err = 0.0;      // against 2 kappa_min L

  double q_residual = 0.0;  // | Q1(N_max) + winding |
  double q_imag_residue = 0.0;
  double q_quadrature_error = 0.0;
  double winding_residual = 0.0;
  double plaquette_residual = 0.0;
  double min_variance = 0.0;
  double tol_Q = 1e-4;

  bool identity_verdict = false;
  std::string failure;  // empty when the verdict is true

  static const char* variance_convention() {
    return "var = (1/(2T))^2 int ds ds' [1 - |r(s) conj(r(s')) + t'(s) conj(t'(s'))|^2] "
           "/ sin^2(pi (s - s')/T); periodization of the real-line kernel 1/(s-s')^2 via "
           "sum_n 1/(x+nT)^2 = (pi/T)^2 / sin^2(pi x/T)";
  }
};

inline PumpReport compare(const PotentialSpec& spec, double E_F, int n_filled,
                          const std::vector<int>& N_list, const Grids& grids = {},
                          double tol_Q = 1e-4) {
  spec.validate();
  if (N_list.empty()) throw ConfigError("compare: N_list must be nonempty");
  for (std::size_t i = 0; i + 1 < N_list.size(); ++i)
    if (N_list[i + 1] <= N_list[i]) throw ConfigError("compare: N_list must be ascending");
  if (grids.n_s < 16 || grids.n_s % 2 != 0)
    throw ConfigError("compare: grids.n_s must be even and >= 16");

  const FermiPoint fermi = FermiPoint::from_energy(E_F);
  const GapCertificate cert = certify_gap(spec, E_F, grids.n_s, {grids.n_steps});

  PumpReport rep;
  rep.E_F = E_F;
  rep.n_filled = n_filled;
  rep.gap_index = cert.n;
  rep.gap_margin = cert.margin;
  rep.tol_Q = tol_Q;

  const ChernResult chern = chern_numbers(spec, n_filled, cert, grids.N_k, grids.N_s,
                                          grids.M_pw);
  rep.chern_per_band = chern.per_band;
  rep.chern_total = chern.total;
  rep.plaquette_residual = chern.plaquette_residual;

  const PhaseTrack track = phase_loop(spec, fermi, cert, GapBranch::Minus, 64, grids.n_steps);
  rep.winding_u_minus = track.winding;
  rep.winding_residual = track.winding_residual;
  rep.winding_charge = winding_charge(track);

  rep.node_count = node_count(spec, fermi, cert, -1.0, 256, grids.n_steps);

  const ConvergenceStudy study =
      convergence_study(spec, fermi, cert, N_list, 128, grids.n_steps);
  rep.kappa_min_L = study.kappa_min_L;
  rep.convergence_rate = study.fitted_rate_r;
  rep.rate_rel_err = study.rel_err_r;

  // pump loops on the uniform closed grid; the endpoint repeats sample 0
  std::vector<GapState> gs;
  gs.reserve((std::size_t)grids.n_s + 1);
  for (int i = 0; i < grids.n_s; ++i)
    gs.push_back(
        gap_solutions(spec, fermi, cert, spec.T * (double)i / (double)grids.n_s, grids.n_steps));
  gs.push_back(gs.front());

  ChargeResult last_q;
  rep.min_variance = std::numeric_limits<double>::infinity();
  for (int N : N_list) {
    std::vector<cplx> rr, tt;
    rr.reserve(gs.size());
    tt.reserve(gs.size());
    for (const auto& g : gs) {
      const auto S = s_matrix_closed_form(g, fermi, N, spec.L);
      rr.push_back(S.r);
      tt.push_back(S.t_prime);
    }
    const ChargeResult q = pumped_charge(rr, tt);
    const double var = charge_variance(rr, tt, spec.T);
    rep.Q1_of_N.emplace_back(N, q.value);
    rep.varQ1_of_N.emplace_back(N, var);
    rep.min_variance = std::min(rep.min_variance, var);
    last_q = q;
  }
  rep.q_imag_residue = last_q.imag_residue;
  rep.q_quadrature_error = last_q.quadrature_error;
  rep.q_residual = std::abs(rep.Q1_of_N.back().second + (double)rep.winding_u_minus);

  // verdict: integer chain + quantized charge at N_max + sane variances
  rep.identity_verdict = true;
  std::ostringstream why;
  if (rep.chern_total != rep.node_count || rep.chern_total != rep.winding_u_minus) {
    rep.identity_verdict = false;
    why << "integer chain broken: chern_total = " << rep.chern_total
        << ", node_count = " << rep.node_count << ", winding = " << rep.winding_u_minus;
  } else if (rep.q_residual > tol_Q) {
    rep.identity_verdict = false;
    why << "charge residual |Q1(N_max) + winding| = " << rep.q_residual << " > tol_Q = "
        << tol_Q;
  } else if (rep.min_variance < -1e-10) {
    rep.identity_verdict = false;
    why << "variance negativity: min variance = " << rep.min_variance;
  }
  rep.failure = why.str();
  return rep;
}

}  // namespace pumpline
