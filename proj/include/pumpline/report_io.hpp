#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "pumpline/bands.hpp"
#include "pumpline/chern.hpp"
#include "pumpline/gapstates.hpp"
#include "pumpline/scattering.hpp"
#include "pumpline/transport.hpp"

// Deterministic output: JSON written with insertion order and %.17g reals
// (lossless round-trip), CSV with a header row. Identical inputs give
// byte-identical artifacts.

namespace pumpline {

namespace io {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Minimal ordered JSON builder; values are preformatted strings.
class JsonObject {
 public:
  void add(const std::string& key, const std::string& raw) {
    items_.emplace_back(key, raw);
  }
  void add_str(const std::string& key, const std::string& s) { add(key, quote(s)); }
  void add(const std::string& key, double v) { add(key, fmt(v)); }
  void add(const std::string& key, int v) { add(key, fmt(v)); }
  void add(const std::string& key, bool v) { add(key, fmt(v)); }

  std::string str(int indent = 0) const {
    const std::string pad(indent + 2, ' ');
    std::string out = "{\n";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      out += pad + quote(items_[i].first) + ": " + items_[i].second;
      if (i + 1 < items_.size()) out += ",";
      out += "\n";
    }
    out += std::string(indent, ' ') + "}";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

template <typename T>
std::string array(const std::vector<T>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += fmt(v[i]);
    if (i + 1 < v.size()) out += ", ";
  }
  return out + "]";
}

inline std::string pair_series(const std::vector<std::pair<int, double>>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += "[" + fmt(v[i].first) + ", " + fmt(v[i].second) + "]";
    if (i + 1 < v.size()) out += ", ";
  }
  return out + "]";
}

}  // namespace io

inline std::string certificate_json(const GapCertificate& cert) {
  io::JsonObject j;
  j.add("n", cert.n);
  j.add("E_F", cert.E_F);
  j.add("margin", cert.margin);
  j.add("disc_sign", cert.disc_sign);
  j.add("s_grid_size", cert.s_grid_size);
  return j.str() + "\n";
}

inline std::string chern_json(const ChernResult& res) {
  io::JsonObject j;
  j.add("per_band", io::array(res.per_band));
  j.add("total", res.total);
  j.add("plaquette_residual", res.plaquette_residual);
  j.add("degenerate_multiplet", res.degenerate_multiplet);
  j.add("refinement_warning", res.refinement_warning);
  return j.str() + "\n";
}

inline std::string pump_report_json(const PumpReport& rep) {
  io::JsonObject j;
  j.add("E_F", rep.E_F);
  j.add("n_filled", rep.n_filled);
  j.add("gap_index", rep.gap_index);
  j.add("gap_margin", rep.gap_margin);
  j.add("chern_per_band", io::array(rep.chern_per_band));
  j.add("chern_total", rep.chern_total);
  j.add("node_count", rep.node_count);
  j.add("winding_u_minus", rep.winding_u_minus);
  j.add("winding_charge", rep.winding_charge);
  j.add("Q1_of_N", io::pair_series(rep.Q1_of_N));
  j.add("varQ1_of_N", io::pair_series(rep.varQ1_of_N));
  j.add("kappa_min_L", rep.kappa_min_L);
  j.add("convergence_rate", rep.convergence_rate);
  j.add("rate_rel_err", rep.rate_rel_err);
  j.add("q_residual", rep.q_residual);
  j.add("q_imag_residue", rep.q_imag_residue);
  j.add("q_quadrature_error", rep.q_quadrature_error);
  j.add("winding_residual", rep.winding_residual);
  j.add("plaquette_residual", rep.plaquette_residual);
  j.add("min_variance", rep.min_variance);
  j.add("tol_Q", rep.tol_Q);
  j.add("identity_verdict", rep.identity_verdict);
  j.add_str("failure", rep.failure);
  j.add_str("variance_convention", PumpReport::variance_convention());
  return j.str() + "\n";
}

// ---- CSV ---------------------------------------------------------------------

inline std::string bands_csv(const std::vector<std::pair<double, std::vector<BandInterval>>>&
                                 per_s_bands) {
  std::string out = "n,s,E_minus,E_plus\n";
  for (const auto& [s, bands] : per_s_bands) {
    for (std::size_t i = 0; i < bands.size(); ++i) {
      out += io::fmt((int)(i + 1)) + "," + io::fmt(s) + "," + io::fmt(bands[i].E_lo) + "," +
             io::fmt(bands[i].E_hi) + "\n";
    }
  }
  return out;
}

inline std::string band_surface_csv(const BlochGrid& grid, int n_bands) {
  std::string out = "band,k,s,E\n";
  for (int ik = 0; ik < grid.N_k; ++ik) {
    for (int is = 0; is < grid.N_s; ++is) {
      const auto& ev = grid.energies[(std::size_t)grid.index(ik, is)];
      const double k = 2.0 * kPi / grid.L * (double)ik / (double)grid.N_k;
      const double s = grid.T * (double)is / (double)grid.N_s;
      for (int n = 0; n < n_bands && n < ev.size(); ++n)
        out += io::fmt(n + 1) + "," + io::fmt(k) + "," + io::fmt(s) + "," + io::fmt(ev[n]) +
               "\n";
    }
  }
  return out;
}

inline std::string phase_track_csv(const PhaseTrack& track) {
  std::string out = "s,re_u,im_u\n";
  for (std::size_t i = 0; i < track.s_samples.size(); ++i)
    out += io::fmt(track.s_samples[i]) + "," + io::fmt(track.u_values[i].real()) + "," +
           io::fmt(track.u_values[i].imag()) + "\n";
  return out;
}

inline std::string node_trajectories_csv(const std::vector<NodeSnapshot>& rows) {
  std::string out = "s,x0\n";
  for (const auto& row : rows)
    for (double z : row.zeros) out += io::fmt(row.s) + "," + io::fmt(z) + "\n";
  return out;
}

inline std::string scatter_csv(const std::vector<ScatteringMatrix>& samples,
                               const std::vector<double>& s_values,
                               const std::vector<cplx>& u_minus) {
  // dev_r = |r_N + u_-| (distance from the quantized limit), dev_t = |t_N|
  std::string out = "N,s,abs_r,arg_r,abs_t,dev_r,dev_t\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& S = samples[i];
    out += io::fmt(S.N) + "," + io::fmt(s_values[i]) + "," + io::fmt(std::abs(S.r)) + "," +
           io::fmt(std::arg(S.r)) + "," + io::fmt(std::abs(S.t)) + "," +
           io::fmt(std::abs(S.r + u_minus[i])) + "," + io::fmt(std::abs(S.t)) + "\n";
  }
  return out;
}

inline std::string convergence_csv(const ConvergenceStudy& study) {
  std::string out = "N,max_dev_r,max_t\n";
  for (const auto& row : study.rows)
    out += io::fmt(row.N) + "," + io::fmt(row.max_dev_r) + "," + io::fmt(row.max_t) + "\n";
  return out;
}

inline std::string charge_series_csv(const PumpReport& rep) {
  std::string out = "N,Q1,varQ1\n";
  for (std::size_t i = 0; i < rep.Q1_of_N.size(); ++i)
    out += io::fmt(rep.Q1_of_N[i].first) + "," + io::fmt(rep.Q1_of_N[i].second) + "," +
           io::fmt(rep.varQ1_of_N[i].second) + "\n";
  return out;
}

}  // namespace pumpline
