#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pumpline/common.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/transfer.hpp"

// Band/gap location from the discriminant D(E) = tr M(E, s): |D| <= 2 inside
// bands, |D| > 2 in gaps, D > 2 below the spectrum. Band edges come from a
// dense E-scan plus bisection on |D| - 2; interior extrema of D with |D| ~ 2
// mark touching bands (closed gaps) and split the run there. certify_gap
// checks that a given Fermi energy stays inside one gap for the whole cycle.

namespace pumpline {

struct BandInterval {
  double E_lo = 0.0;
  double E_hi = 0.0;
};

struct BandScanOptions {
  int n_scan = 1200;        // dense-scan resolution over [E_start, E_max]
  int n_steps = 2048;       // integrator steps per period
  double bisect_tol = 1e-10;
  double touch_tol = 1e-6;  // |D| >= 2 - touch_tol at an interior extremum counts as touching
};

namespace detail {

class DiscSweep {
 public:
  DiscSweep(const PotentialSpec& spec, double s, int n_steps)
      : tab_(PotentialTable::build(freeze_potential(spec, s), 0.0, spec.L, n_steps)) {}

  double operator()(double E) const {
    const auto m = rk4_fundamental(tab_, E);
    return m[0] + m[3];
  }

 private:
  PotentialTable tab_;
};

inline double bisect_root(const std::function<double(double)>& f, double a, double b, double fa,
                          double tol) {
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fa <= 0.0) == (fm <= 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// Ternary search for an extremum of f on [a, b]; sign = +1 maximum, -1 minimum.
inline double extremum(const std::function<double(double)>& f, double a, double b, double sign,
                       double tol) {
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (sign * f(m1) < sign * f(m2))
      a = m1;
    else
      b = m2;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// All band intervals below E_max at fixed s (possibly more than requested).
// Throws if fewer than n_bands complete bands were found below E_max.
inline std::vector<BandInterval> band_edges(const PotentialSpec& spec, double s, double E_max,
                                            int n_bands, const BandScanOptions& opt = {}) {
  spec.validate();
  const detail::DiscSweep D(spec, s, opt.n_steps);
  const auto f_abs = [&](double E) { return std::abs(D(E)) - 2.0; };

  const double E_start = min_potential(spec, s) - 1.0;
  if (!(E_max > E_start))
    throw ConfigError("band_edges: E_max must exceed the bottom of the spectrum");

  const int n = std::max(opt.n_scan, 64);
  const double h = (E_max - E_start) / (double)n;
  std::vector<double> Es(n + 1), Ds(n + 1);
  for (int i = 0; i <= n; ++i) {
    Es[i] = E_start + h * (double)i;
    Ds[i] = D(Es[i]);
  }

  // boundaries where the in-band classification flips
  std::vector<double> edges;
  std::vector<bool> in_band(n + 1);
  for (int i = 0; i <= n; ++i) in_band[i] = std::abs(Ds[i]) <= 2.0;
  for (int i = 1; i <= n; ++i) {
    if (in_band[i] != in_band[i - 1]) {
      edges.push_back(detail::bisect_root(f_abs, Es[i - 1], Es[i], f_abs(Es[i - 1]),
                                          opt.bisect_tol));
    }
  }

  // assemble runs: [edge_0, edge_1], [edge_2, edge_3], ...; the scan starts
  // below the spectrum (D > 2), so the first edge opens band 1. An odd edge
  // count leaves a run still open at E_max.
  struct Run {
    double lo, hi;
    bool complete;
  };
  std::vector<Run> runs;
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2)
    runs.push_back({edges[k], edges[k + 1], true});
  const bool last_open = (edges.size() % 2 == 1);
  if (last_open) runs.push_back({edges.back(), E_max, false});

  // split runs at interior touch points (extrema of D reaching |D| ~ 2) and at
  // narrow gaps the grid stepped over; drop the trailing piece of an open run
  std::vector<BandInterval> out;
  for (const auto& run : runs) {
    std::vector<double> cuts;
    for (int i = 1; i < n; ++i) {
      if (Es[i] <= run.lo || Es[i] >= run.hi) continue;
      const bool is_max = Ds[i] >= Ds[i - 1] && Ds[i] >= Ds[i + 1];
      const bool is_min = Ds[i] <= Ds[i - 1] && Ds[i] <= Ds[i + 1];
      if (!is_max && !is_min) continue;
      const double sign = is_max ? 1.0 : -1.0;
      const double a = std::max(run.lo, Es[i - 1]);
      const double b = std::min(run.hi, Es[i + 1]);
      const double Ex = detail::extremum([&](double E) { return D(E); }, a, b, sign,
                                         opt.bisect_tol);
      const double Dx = D(Ex);
      if (std::abs(Dx) >= 2.0 + opt.touch_tol) {
        // genuine (narrow) gap: resolve both edges
        cuts.push_back(detail::bisect_root(f_abs, a, Ex, f_abs(a), opt.bisect_tol));
        cuts.push_back(detail::bisect_root(f_abs, Ex, b, f_abs(Ex), opt.bisect_tol));
      } else if (std::abs(Dx) >= 2.0 - opt.touch_tol) {
        cuts.push_back(Ex);  // touching bands: coincident edges
        cuts.push_back(Ex);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<BandInterval> pieces;
    double lo = run.lo;
    for (std::size_t k = 0; k + 1 < cuts.size(); k += 2) {
      pieces.push_back({lo, cuts[k]});
      lo = cuts[k + 1];
    }
    pieces.push_back({lo, run.hi});
    if (!run.complete) pieces.pop_back();  // upper end is E_max, not a band edge
    out.insert(out.end(), pieces.begin(), pieces.end());
  }

  if ((int)out.size() < n_bands) {
    std::ostringstream msg;
    msg << "band_edges: found only " << out.size() << " complete band(s) below E_max = " << E_max
        << " (requested " << n_bands << ")";
    if (last_open) msg << "; the last band is still open at E_max";
    throw ConfigError(msg.str());
  }
  return out;
}

// Number of complete bands below E at fixed s (no shortfall error). E is
// assumed to lie outside a band (in a gap or below the spectrum).
inline int count_bands_below(const PotentialSpec& spec, double s, double E,
                             const BandScanOptions& opt = {}) {
  if (E <= min_potential(spec, s)) return 0;
  return (int)band_edges(spec, s, E, 0, opt).size();
}

struct GapCertificate {
  int n = 0;            // gap index: number of bands below E_F (0 = below the spectrum)
  double E_F = 0.0;
  double margin = 0.0;  // min_s |D(E_F, s)| - 2
  int disc_sign = +1;   // sign of D(E_F, s), constant over s, equals (-1)^n
  int s_grid_size = 0;
};

struct CertifyOptions {
  int n_steps = 2048;
  double eps_margin = 1e-6;
  BandScanOptions scan{};
};

inline GapCertificate certify_gap(const PotentialSpec& spec, double E_F, int n_s = 64,
                                  const CertifyOptions& opt = {}) {
  spec.validate();
  if (n_s < 16) throw ConfigError("certify_gap: n_s must be >= 16");
  double margin = std::numeric_limits<double>::infinity();
  int sign = 0;
  for (int i = 0; i < n_s; ++i) {
    const double s = spec.T * (double)i / (double)n_s;
    const double D = discriminant(spec, E_F, s, opt.n_steps);
    if (std::abs(D) <= 2.0 + opt.eps_margin) {
      std::ostringstream msg;
      msg << "certify_gap: no spectral gap at E_F = " << E_F << ": |D| = " << std::abs(D)
          << " <= 2 + " << opt.eps_margin << " at s = " << s;
      throw GapClosureError(msg.str());
    }
    const int sgn = D > 0.0 ? +1 : -1;
    if (sign == 0) sign = sgn;
    if (sgn != sign) {
      std::ostringstream msg;
      msg << "certify_gap: discriminant changes sign along the cycle (gap crossed) at s = " << s;
      throw GapClosureError(msg.str());
    }
    margin = std::min(margin, std::abs(D) - 2.0);
  }

  GapCertificate cert;
  cert.E_F = E_F;
  cert.margin = margin;
  cert.disc_sign = sign;
  cert.s_grid_size = n_s;
  cert.n = count_bands_below(spec, 0.0, E_F, opt.scan);
  const int expect_sign = (cert.n % 2 == 0) ? +1 : -1;
  if (expect_sign != sign)
    throw NumericalError("certify_gap: band count n = " + std::to_string(cert.n) +
                         " inconsistent with discriminant sign " + std::to_string(sign) +
                         "; refine the band scan");
  return cert;
}

// Common open interval of gap number `gap_index` over an s-grid: the
// intersection of the per-s gap intervals. Convenient for picking a mid-gap
// Fermi energy.
inline BandInterval common_gap(const PotentialSpec& spec, int gap_index, double E_max,
                               int n_s_samples = 8, const BandScanOptions& opt = {}) {
  if (gap_index < 1) throw ConfigError("common_gap: gap_index must be >= 1");
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_s_samples; ++i) {
    const double s = spec.T * (double)i / (double)n_s_samples;
    const auto bands = band_edges(spec, s, E_max, gap_index + 1, opt);
    lo = std::max(lo, bands[(std::size_t)gap_index - 1].E_hi);
    hi = std::min(hi, bands[(std::size_t)gap_index].E_lo);
  }
  if (!(lo < hi))
    throw GapClosureError("common_gap: gap " + std::to_string(gap_index) +
                          " has empty intersection over the cycle");
  return {lo, hi};
}

}  // namespace pumpline
