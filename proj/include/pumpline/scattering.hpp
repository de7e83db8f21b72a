#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "pumpline/bands.hpp"
#include "pumpline/common.hpp"
#include "pumpline/gapstates.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/transfer.hpp"

// Scattering matrix of the pump truncated to N periods, two independent ways:
// the closed form built from the gap-state data (kappa, u_+-), and a direct
// route that propagates the ODE across the window and matches plane waves on
// both sides. Their agreement is the central cross-check of the library.
//
// Conventions: incidence e^{ipx} from the left with unit amplitude; the
// transmitted wave is t e^{ipx} with the absolute phase (free propagation
// gives t = 1). Time reversal makes S symmetric, t' = t.

namespace pumpline {

struct ScatteringMatrix {
  cplx r, t, r_prime, t_prime;
  double E = 0.0;
  double s = 0.0;
  int N = 0;  // number of periods; 0 marks the N -> infinity limit object

  double unitarity_residual() const {
    const double a = std::abs(std::norm(r) + std::norm(t) - 1.0);
    const double b = std::abs(std::norm(r_prime) + std::norm(t_prime) - 1.0);
    const double c = std::abs(r * std::conj(t_prime) + t * std::conj(r_prime));
    return std::max({a, b, c});
  }
  double symmetry_residual() const { return std::abs(t - t_prime); }
};

// Closed form from the in-gap Floquet data:
//   r_N  = -u_- (1 - q) / (1 - q w),          q = e^{-2 kappa N L}, w = u_- / u_+,
//   t_N  = (-1)^{nN} e^{-kappa N L} e^{-i p N L} (1 - w) / (1 - q w),
//   r'_N = -conj(u_+) e^{-2 i p N L} (1 - q) / (1 - q w),  t' = t.
// Since |w| = 1 and q < 1 the denominator cannot vanish for N >= 1; guarded anyway.
inline ScatteringMatrix s_matrix_closed_form(const GapState& gap, const FermiPoint& fermi,
                                             int N, double L) {
  if (N < 1) throw ConfigError("s_matrix_closed_form: N must be >= 1");
  const double q = std::exp(-2.0 * gap.kappa * (double)N * L);
  const cplx w = gap.u_minus / gap.u_plus;
  const cplx denom = 1.0 - q * w;
  if (std::abs(denom) < 1e-12)
    throw NumericalError("s_matrix_closed_form: resonant denominator |1 - e^{-2 kappa N L} u_- / u_+| < 1e-12");
  const double sgn = (gap.n * N) % 2 == 0 ? 1.0 : -1.0;
  const cplx phase_t = std::exp(cplx(0.0, -fermi.p * (double)N * L));
  ScatteringMatrix S;
  S.r = -gap.u_minus * (1.0 - q) / denom;
  S.t = sgn * std::exp(-gap.kappa * (double)N * L) * phase_t * (1.0 - w) / denom;
  S.t_prime = S.t;
  S.r_prime = -std::conj(gap.u_plus) * phase_t * phase_t * (1.0 - q) / denom;
  S.E = fermi.E_F;
  S.s = gap.s;
  S.N = N;
  return S;
}

// N -> infinity: perfect reflection with phase -u_- (left) and -conj(u_+)
// (right, up to the plane-wave phase convention dropped in the limit).
inline ScatteringMatrix limit_s_matrix(const GapState& gap, double E_F = 0.0) {
  ScatteringMatrix S;
  S.r = -gap.u_minus;
  S.t = S.t_prime = cplx(0.0, 0.0);
  S.r_prime = -std::conj(gap.u_plus);
  S.E = E_F;
  S.s = gap.s;
  S.N = 0;
  return S;
}

namespace detail {

// 2-norm condition number of a complex 2x2; sigma_min comes from
// |det| = sigma_max sigma_min (the direct eigenvalue formula cancels badly
// when the singular values are far apart).
inline double cond2(const cplx a11, const cplx a12, const cplx a21, const cplx a22) {
  const double f = std::norm(a11) + std::norm(a12) + std::norm(a21) + std::norm(a22);
  const double det = std::abs(a11 * a22 - a12 * a21);
  if (det == 0.0) return std::numeric_limits<double>::infinity();
  const double disc = std::sqrt(std::max(0.0, f * f - 4.0 * det * det));
  return 0.5 * (f + disc) / det;
}

}  // namespace detail

// Direct route: propagate the fundamental matrix across [0, N L] and match
// e^{+-ipx} on both sides. The eliminations are ordered so no amplitude is
// produced by catastrophic cancellation: r and r' come from ratios of
// same-magnitude Wronskian functionals, t and t' from reciprocals of large
// ones. In a gap the window growth e^{kappa N L} still limits the usable
// range: the matching system is rejected beyond condition number 1e12, and
// the precondition N kappa L <= 35 bounds what may be attempted at all.
inline ScatteringMatrix s_matrix_direct(const PotentialSpec& spec, const FermiPoint& fermi,
                                        double s, int N, int n_steps = 2048) {
  if (N < 1) throw ConfigError("s_matrix_direct: N must be >= 1");
  spec.validate();
  const double p = fermi.p;
  const double L = spec.L;

  // precondition: in a gap, N kappa L <= 35
  const TransferMatrix M1 = monodromy(spec, fermi.E_F, s, n_steps);
  const double D = M1.trace();
  if (std::abs(D) > 2.0) {
    const double kappa = std::log(0.5 * (std::abs(D) + std::sqrt(D * D - 4.0))) / L;
    if ((double)N * kappa * L > 35.0) {
      std::ostringstream msg;
      msg << "s_matrix_direct: N kappa L = " << (double)N * kappa * L
          << " exceeds 35; use the closed form";
      throw ConfigError(msg.str());
    }
  }

  // fundamental matrix across the N-period window, single pass
  const FrozenPotential fp = freeze_potential(spec, s);
  const PotentialTable tab = PotentialTable::build(fp, 0.0, (double)N * L, N * n_steps);
  const auto m = detail::rk4_fundamental(tab, fermi.E_F);
  const double a = m[0], b = m[1], c = m[2], d = m[3];

  const cplx ip(0.0, p);
  const cplx Mvin0 = a + ip * b, Mvin1 = c + ip * d;     // Mt (1, ip)
  const cplx Mvout0 = a - ip * b, Mvout1 = c - ip * d;   // Mt (1, -ip)
  const cplx e_p = std::exp(cplx(0.0, p * (double)N * L));

  // conditioning guard on the matching system [Mt v_out | -e_p v_in]
  const double cond = detail::cond2(Mvout0, -e_p, Mvout1, -e_p * ip);
  if (cond > 1e12) {
    std::ostringstream msg;
    msg << "s_matrix_direct: matching system condition number " << cond
        << " > 1e12; use the closed form";
    throw NumericalError(msg.str());
  }

  const auto f_plus = [&](cplx y0, cplx y1) { return ip * y0 + y1; };   // kills (1, -ip)
  const auto f_minus = [&](cplx y0, cplx y1) { return ip * y0 - y1; };  // kills (1, +ip)

  ScatteringMatrix S;
  S.E = fermi.E_F;
  S.s = s;
  S.N = N;
  // left incidence: Mt (v_in + r v_out) = t e_p v_in
  S.r = -f_minus(Mvin0, Mvin1) / f_minus(Mvout0, Mvout1);
  // t from the inverse map (det Mt = 1): v_in + r v_out = t e_p Mt^{-1} v_in
  const cplx Minv_vin0 = d - ip * b, Minv_vin1 = -c + ip * a;
  S.t = 2.0 * ip / (e_p * f_plus(Minv_vin0, Minv_vin1));
  // right incidence: Mt (t' v_out) = conj(e_p) v_out + r' e_p v_in
  S.t_prime = std::conj(e_p) * 2.0 * ip / f_minus(Mvout0, Mvout1);
  S.r_prime = f_plus(Mvout0, Mvout1) * S.t_prime / (e_p * 2.0 * ip);
  return S;
}

// Approach to the quantized limit: per N, the worst-case deviations over the
// cycle, and least-squares exponential rates fitted on the N_list.
struct ConvergenceRow {
  int N = 0;
  double max_dev_r = 0.0;  // max_s |r_N + u_-|
  double max_t = 0.0;      // max_s |t_N|
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double fitted_rate_r = 0.0;  // positive; expected ~ 2 kappa_min L
  double fitted_rate_t = 0.0;  // positive; expected ~ kappa_min L
  double kappa_min_L = 0.0;
  double rel_err_r = 0.0;      // |rate_r - 2 kappa_min L| / (2 kappa_min L)
  double rel_err_t = 0.0;
};

namespace detail {

inline double fit_log_slope(const std::vector<int>& Ns, const std::vector<double>& vals,
                            double floor) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (vals[i] <= floor) continue;
    const double x = (double)Ns[i], y = std::log(vals[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw NumericalError("convergence fit: fewer than two points above the noise floor");
  const double denom = (double)n * sxx - sx * sx;
  return ((double)n * sxy - sx * sy) / denom;
}

}  // namespace detail

inline ConvergenceStudy convergence_study(const PotentialSpec& spec, const FermiPoint& fermi,
                                          const GapCertificate& cert,
                                          const std::vector<int>& N_list, int n_s = 128,
                                          int n_steps = 2048) {
  if (N_list.empty()) throw ConfigError("convergence_study: N_list must be nonempty");
  for (std::size_t i = 0; i + 1 < N_list.size(); ++i)
    if (N_list[i + 1] <= N_list[i])
      throw ConfigError("convergence_study: N_list must be strictly ascending");

  std::vector<GapState> gs;
  gs.reserve((std::size_t)n_s);
  double kmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_s; ++i) {
    gs.push_back(gap_solutions(spec, fermi, cert, spec.T * (double)i / (double)n_s, n_steps));
    kmin = std::min(kmin, gs.back().kappa);
  }

  ConvergenceStudy study;
  study.kappa_min_L = kmin * spec.L;
  for (int N : N_list) {
    ConvergenceRow row;
    row.N = N;
    for (const auto& g : gs) {
      const auto S = s_matrix_closed_form(g, fermi, N, spec.L);
      row.max_dev_r = std::max(row.max_dev_r, std::abs(S.r + g.u_minus));
      row.max_t = std::max(row.max_t, std::abs(S.t));
    }
    study.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < study.rows.size(); ++i) {
    const double cur = study.rows[i].max_dev_r, nxt = study.rows[i + 1].max_dev_r;
    if (cur > 1e-13 && nxt > cur * (1.0 + 1e-9))
      throw NumericalError("convergence_study: |r_N + u_-| fails to decay between N = " +
                           std::to_string(study.rows[i].N) + " and N = " +
                           std::to_string(study.rows[i + 1].N));
  }
  std::vector<int> Ns;
  std::vector<double> dr, dt;
  for (const auto& row : study.rows) {
    Ns.push_back(row.N);
    dr.push_back(row.max_dev_r);
    dt.push_back(row.max_t);
  }
  study.fitted_rate_r = -detail::fit_log_slope(Ns, dr, 1e-13);
  study.fitted_rate_t = -detail::fit_log_slope(Ns, dt, 1e-13);
  study.rel_err_r = std::abs(study.fitted_rate_r - 2.0 * study.kappa_min_L) /
                    (2.0 * study.kappa_min_L);
  study.rel_err_t = std::abs(study.fitted_rate_t - study.kappa_min_L) / study.kappa_min_L;
  return study;
}

}  // namespace pumpline
