#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pumpline/common.hpp"

// Doubly periodic potentials V(x, s) = sum_m c_m(s) * {cos,sin}(2 pi m x / L),
// where each amplitude c_m is itself a real truncated Fourier series in the
// cycle angle 2 pi s / T. The family is closed under everything downstream:
// exact spatial Fourier coefficients, exact s-periodicity, real values.

namespace pumpline {

// Real truncated Fourier series c(theta) = c0 + sum_j (a_j cos j theta + b_j sin j theta).
struct CycleFourier {
  double c0 = 0.0;
  std::vector<double> cos_coeff;  // a_1, a_2, ...
  std::vector<double> sin_coeff;  // b_1, b_2, ...

  double eval(double theta) const {
    double v = c0;
    for (std::size_t j = 0; j < cos_coeff.size(); ++j)
      v += cos_coeff[j] * std::cos((double)(j + 1) * theta);
    for (std::size_t j = 0; j < sin_coeff.size(); ++j)
      v += sin_coeff[j] * std::sin((double)(j + 1) * theta);
    return v;
  }
};

struct HarmonicTerm {
  enum class Kind { Cos, Sin };
  int m = 0;            // spatial harmonic index, >= 0
  Kind kind = Kind::Cos;
  CycleFourier coeff;   // s-periodic amplitude
};

struct PotentialSpec {
  double L = 1.0;  // spatial period
  double T = 1.0;  // cycle period
  std::vector<HarmonicTerm> terms;

  int max_harmonic() const {
    int m = 0;
    for (const auto& t : terms) m = std::max(m, t.m);
    return m;
  }

  void validate() const {
    if (!(L > 0.0)) throw ConfigError("potential: L must be > 0, got " + std::to_string(L));
    if (!(T > 0.0)) throw ConfigError("potential: T must be > 0, got " + std::to_string(T));
    for (const auto& t : terms) {
      if (t.m < 0) throw ConfigError("potential: term has m < 0 (m = " + std::to_string(t.m) + ")");
      if (!std::isfinite(t.coeff.c0))
        throw ConfigError("potential: non-finite coefficient in term m = " + std::to_string(t.m));
      for (double v : t.coeff.cos_coeff)
        if (!std::isfinite(v)) throw ConfigError("potential: non-finite cos coefficient");
      for (double v : t.coeff.sin_coeff)
        if (!std::isfinite(v)) throw ConfigError("potential: non-finite sin coefficient");
    }
  }
};

inline double eval_potential(const PotentialSpec& spec, double x, double s) {
  const double gx = 2.0 * kPi / spec.L;
  const double th = 2.0 * kPi * s / spec.T;
  double v = 0.0;
  for (const auto& t : spec.terms) {
    const double c = t.coeff.eval(th);
    const double ang = gx * (double)t.m * x;
    v += c * (t.kind == HarmonicTerm::Kind::Cos ? std::cos(ang) : std::sin(ang));
  }
  return v;
}

// Spatial Fourier coefficient:  V(x,s) = sum_m Vhat_m(s) e^{2 pi i m x / L}.
// cos term: c/2 at +-m ; sin term: -+ i c/2 (so Vhat_{-m} = conj(Vhat_m)).
inline cplx fourier_coefficient(const PotentialSpec& spec, double s, int m) {
  const double th = 2.0 * kPi * s / spec.T;
  cplx out(0.0, 0.0);
  const int am = std::abs(m);
  for (const auto& t : spec.terms) {
    if (t.m != am) continue;
    const double c = t.coeff.eval(th);
    if (t.m == 0) {
      if (t.kind == HarmonicTerm::Kind::Cos) out += c;
      // sin with m = 0 is the zero function
      continue;
    }
    if (t.kind == HarmonicTerm::Kind::Cos) {
      out += cplx(0.5 * c, 0.0);
    } else {
      // sin(g m x) = (e^{i g m x} - e^{-i g m x}) / 2i
      out += cplx(0.0, m > 0 ? -0.5 * c : 0.5 * c);
    }
  }
  return out;
}

// Potential with the cycle coordinate frozen; the hot path for the ODE
// integrator. Terms with equal m are merged into A_m cos + B_m sin.
struct FrozenPotential {
  double L = 1.0;
  struct Row {
    int m;
    double A, B;
  };
  std::vector<Row> rows;

  double operator()(double x) const {
    const double g = 2.0 * kPi / L;
    double v = 0.0;
    for (const auto& r : rows) {
      const double ang = g * (double)r.m * x;
      v += r.A * std::cos(ang) + r.B * std::sin(ang);
    }
    return v;
  }
};

inline FrozenPotential freeze_potential(const PotentialSpec& spec, double s) {
  const double th = 2.0 * kPi * s / spec.T;
  FrozenPotential fp;
  fp.L = spec.L;
  for (const auto& t : spec.terms) {
    const double c = t.coeff.eval(th);
    auto it = std::find_if(fp.rows.begin(), fp.rows.end(),
                           [&](const FrozenPotential::Row& r) { return r.m == t.m; });
    if (it == fp.rows.end()) {
      fp.rows.push_back({t.m, 0.0, 0.0});
      it = fp.rows.end() - 1;
    }
    if (t.kind == HarmonicTerm::Kind::Cos)
      it->A += c;
    else
      it->B += c;
  }
  return fp;
}

inline double min_potential(const PotentialSpec& spec, double s, int n_samples = 512) {
  const FrozenPotential fp = freeze_potential(spec, s);
  double vmin = fp(0.0);
  for (int i = 1; i < n_samples; ++i)
    vmin = std::min(vmin, fp(spec.L * (double)i / (double)n_samples));
  return vmin;
}

struct FermiPoint {
  double E_F = 0.0;
  double p = 0.0;  // p = sqrt(E_F)

  static FermiPoint from_energy(double EF) {
    if (!(EF > 0.0)) throw ConfigError("Fermi energy must be > 0, got " + std::to_string(EF));
    return FermiPoint{EF, std::sqrt(EF)};
  }
};

// ---- presets ---------------------------------------------------------------

// Rigidly sliding cosine V(x,s) = V0 cos(2 pi (x - s L / T) / L): the standard
// single-band pump, one node crossing per cycle in the first gap.
inline PotentialSpec sliding_cosine(double V0 = 2.0, double L = 1.0, double T = 1.0) {
  PotentialSpec spec;
  spec.L = L;
  spec.T = T;
  HarmonicTerm tc;  // cos(2 pi x/L) * V0 cos(2 pi s/T)
  tc.m = 1;
  tc.kind = HarmonicTerm::Kind::Cos;
  tc.coeff.cos_coeff = {V0};
  HarmonicTerm ts;  // sin(2 pi x/L) * V0 sin(2 pi s/T)
  ts.m = 1;
  ts.kind = HarmonicTerm::Kind::Sin;
  ts.coeff.sin_coeff = {V0};
  spec.terms = {tc, ts};
  spec.validate();
  return spec;
}

// Two-harmonic loop pump
//   V(x,s) = a(s) cos(2 pi x/L) + b(s) cos(4 pi x/L + phi(s)),
//   a(s) = a0 + a1 cos(2 pi s/T), b(s) = b0 + b1 cos(2 pi s/T), phi(s) = -2 pi s/T.
// The first-harmonic amplitude stays real (no winding); the second harmonic
// carries the winding, so the pumping lives in the second gap. Default
// amplitudes keep that gap open with kappa*L ~ 0.6 along the whole cycle.
inline PotentialSpec two_harmonic_pump(double a0 = 2.0, double a1 = 0.5, double b0 = 16.0,
                                       double b1 = 1.0, double L = 1.0, double T = 1.0) {
  PotentialSpec spec;
  spec.L = L;
  spec.T = T;
  HarmonicTerm h1;
  h1.m = 1;
  h1.kind = HarmonicTerm::Kind::Cos;
  h1.coeff.c0 = a0;
  h1.coeff.cos_coeff = {a1};
  // b(s) cos(4 pi x/L + phi) = [b cos phi] cos(4 pi x/L) - [b sin phi] sin(4 pi x/L);
  // with phi = -theta: b cos phi = b0 cos th + b1 cos^2 th, -b sin phi = b0 sin th + b1 sin th cos th.
  HarmonicTerm h2c;
  h2c.m = 2;
  h2c.kind = HarmonicTerm::Kind::Cos;
  h2c.coeff.c0 = 0.5 * b1;
  h2c.coeff.cos_coeff = {b0, 0.5 * b1};
  HarmonicTerm h2s;
  h2s.m = 2;
  h2s.kind = HarmonicTerm::Kind::Sin;
  h2s.coeff.sin_coeff = {b0, 0.5 * b1};
  spec.terms = {h1, h2c, h2s};
  spec.validate();
  return spec;
}

// ---- config parsing --------------------------------------------------------
// Schema: { "L": real, "T": real, "preset": optional string,
//           "terms": [ {"m": int, "kind": "cos"|"sin",
//                       "coeff_fourier": {"const": real, "cos": [...], "sin": [...]}} ] }

namespace detail {
inline double require_number(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("potential config: missing key \"" + key + "\"");
  if (!j.at(key).is_number())
    throw ConfigError("potential config: key \"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

inline std::vector<double> number_list(const nlohmann::json& j, const std::string& key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array())
    throw ConfigError("potential config: key \"" + key + "\" must be an array of numbers");
  for (const auto& v : j.at(key)) {
    if (!v.is_number())
      throw ConfigError("potential config: key \"" + key + "\" must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}
}  // namespace detail

inline PotentialSpec load_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("potential config: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "L" && k != "T" && k != "preset" && k != "terms")
      throw ConfigError("potential config: unknown key \"" + k + "\"");
  }
  const double L = detail::require_number(j, "L");
  const double T = detail::require_number(j, "T");

  if (j.contains("preset")) {
    if (j.contains("terms"))
      throw ConfigError("potential config: \"preset\" and \"terms\" are mutually exclusive");
    if (!j.at("preset").is_string())
      throw ConfigError("potential config: key \"preset\" must be a string");
    const std::string name = j.at("preset").get<std::string>();
    if (name == "sliding_cosine") return sliding_cosine(2.0, L, T);
    if (name == "two_harmonic_pump") return two_harmonic_pump(2.0, 0.5, 16.0, 1.0, L, T);
    throw ConfigError("potential config: unknown preset \"" + name + "\"");
  }

  if (!j.contains("terms"))
    throw ConfigError("potential config: missing key \"terms\" (or \"preset\")");
  if (!j.at("terms").is_array()) throw ConfigError("potential config: key \"terms\" must be an array");

  PotentialSpec spec;
  spec.L = L;
  spec.T = T;
  for (const auto& tj : j.at("terms")) {
    if (!tj.is_object()) throw ConfigError("potential config: each term must be an object");
    for (auto it = tj.begin(); it != tj.end(); ++it) {
      const std::string& k = it.key();
      if (k != "m" && k != "kind" && k != "coeff_fourier")
        throw ConfigError("potential config: term: unknown key \"" + k + "\"");
    }
    HarmonicTerm term;
    if (!tj.contains("m") || !tj.at("m").is_number_integer())
      throw ConfigError("potential config: term key \"m\" must be an integer");
    term.m = tj.at("m").get<int>();
    if (!tj.contains("kind") || !tj.at("kind").is_string())
      throw ConfigError("potential config: term key \"kind\" must be \"cos\" or \"sin\"");
    const std::string kind = tj.at("kind").get<std::string>();
    if (kind == "cos")
      term.kind = HarmonicTerm::Kind::Cos;
    else if (kind == "sin")
      term.kind = HarmonicTerm::Kind::Sin;
    else
      throw ConfigError("potential config: term key \"kind\" must be \"cos\" or \"sin\", got \"" +
                        kind + "\"");
    if (!tj.contains("coeff_fourier") || !tj.at("coeff_fourier").is_object())
      throw ConfigError("potential config: term key \"coeff_fourier\" must be an object");
    const auto& cf = tj.at("coeff_fourier");
    for (auto it = cf.begin(); it != cf.end(); ++it) {
      const std::string& k = it.key();
      if (k != "const" && k != "cos" && k != "sin")
        throw ConfigError("potential config: coeff_fourier: unknown key \"" + k + "\"");
    }
    if (cf.contains("const")) {
      if (!cf.at("const").is_number())
        throw ConfigError("potential config: coeff_fourier key \"const\" must be a number");
      term.coeff.c0 = cf.at("const").get<double>();
    }
    term.coeff.cos_coeff = detail::number_list(cf, "cos");
    term.coeff.sin_coeff = detail::number_list(cf, "sin");
    spec.terms.push_back(std::move(term));
  }
  spec.validate();
  return spec;
}

}  // namespace pumpline
