// pumpline: adiabatic charge pumps in one dimension.
//
// Subcommands work off one JSON run configuration:
//   {
//     "potential": { "L": 1.0, "T": 1.0, "preset": "sliding_cosine" },   // or "terms": [...]
//     "E_F": 9.856938575,
//     "n_filled": 1,
//     "N_list": [1, 2, ..., 10],
//     "grids": { "n_s": 512, "N_k": 32, "N_s": 32, "M_pw": 12, "n_steps": 2048 },
//     "output_dir": "out",
//     "seed": 0
//   }
// Exit codes: 0 success, 1 configuration error, 2 no open gap at E_F,
// 3 numerical failure. PUMPLINE_THREADS caps internal parallelism.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pumpline/bands.hpp"
#include "pumpline/chern.hpp"
#include "pumpline/common.hpp"
#include "pumpline/gapstates.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/report_io.hpp"
#include "pumpline/scattering.hpp"
#include "pumpline/transport.hpp"

namespace {

using nlohmann::json;
using namespace pumpline;

struct RunConfig {
  PotentialSpec potential;
  double E_F = 0.0;
  int n_filled = 1;
  std::vector<int> N_list;
  Grids grids;
  std::string output_dir = "out";
  long seed = 0;
};

json default_config_for_preset(const std::string& name) {
  json j;
  j["potential"] = {{"L", 1.0}, {"T", 1.0}, {"preset", name}};
  if (name == "sliding_cosine") {
    j["E_F"] = 9.856938575;  // midpoint of the first gap
    j["n_filled"] = 1;
  } else if (name == "two_harmonic_pump") {
    j["E_F"] = 39.314618;  // midpoint of the second gap
    j["n_filled"] = 2;
  } else {
    throw ConfigError("unknown preset \"" + name + "\"");
  }
  j["N_list"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  j["output_dir"] = "out";
  j["seed"] = 0;
  return j;
}

void apply_override(json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--override expects key=value, got \"" + kv + "\"");
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (...) {
    value = raw;  // unquoted strings are taken literally
  }
  json* node = &cfg;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (key.empty()) throw ConfigError("--override: empty key segment in \"" + path + "\"");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

int require_int(const json& j, const std::string& key, int dflt, int minimum) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number_integer())
    throw ConfigError("config: key \"" + key + "\" must be an integer");
  const int v = j.at(key).get<int>();
  if (v < minimum)
    throw ConfigError("config: key \"" + key + "\" must be >= " + std::to_string(minimum));
  return v;
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "potential" && k != "E_F" && k != "n_filled" && k != "N_list" && k != "grids" &&
        k != "output_dir" && k != "seed")
      throw ConfigError("config: unknown key \"" + k + "\"");
  }
  RunConfig cfg;
  if (!j.contains("potential")) throw ConfigError("config: missing key \"potential\"");
  cfg.potential = load_spec(j.at("potential"));
  if (!j.contains("E_F")) throw ConfigError("config: missing key \"E_F\"");
  if (!j.at("E_F").is_number()) throw ConfigError("config: key \"E_F\" must be a number");
  cfg.E_F = j.at("E_F").get<double>();
  cfg.n_filled = require_int(j, "n_filled", 1, 1);
  if (j.contains("N_list")) {
    if (!j.at("N_list").is_array()) throw ConfigError("config: key \"N_list\" must be an array");
    for (const auto& v : j.at("N_list")) {
      if (!v.is_number_integer())
        throw ConfigError("config: key \"N_list\" must contain integers");
      cfg.N_list.push_back(v.get<int>());
    }
  } else {
    cfg.N_list = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  }
  if (cfg.N_list.empty()) throw ConfigError("config: key \"N_list\" must be nonempty");
  for (std::size_t i = 0; i + 1 < cfg.N_list.size(); ++i)
    if (cfg.N_list[i + 1] <= cfg.N_list[i])
      throw ConfigError("config: key \"N_list\" must be strictly ascending");
  if (cfg.N_list.front() < 1) throw ConfigError("config: N values must be >= 1");
  const json grids = j.contains("grids") ? j.at("grids") : json::object();
  for (auto it = grids.begin(); it != grids.end(); ++it) {
    const std::string& k = it.key();
    if (k != "n_s" && k != "N_k" && k != "N_s" && k != "M_pw" && k != "n_steps")
      throw ConfigError("config: grids: unknown key \"" + k + "\"");
  }
  cfg.grids.n_s = require_int(grids, "n_s", 512, 16);
  if (cfg.grids.n_s % 2 != 0) throw ConfigError("config: grids.n_s must be even");
  cfg.grids.N_k = require_int(grids, "N_k", 32, 8);
  cfg.grids.N_s = require_int(grids, "N_s", 32, 8);
  cfg.grids.M_pw = require_int(grids, "M_pw", 12, 2);
  cfg.grids.n_steps = require_int(grids, "n_steps", 2048, 64);
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string())
      throw ConfigError("config: key \"output_dir\" must be a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw ConfigError("config: key \"seed\" must be an integer");
    cfg.seed = j.at("seed").get<long>();
  }
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out << content;
}

// ---- subcommands ------------------------------------------------------------

int cmd_bands(const RunConfig& cfg) {
  const auto cert = certify_gap(cfg.potential, cfg.E_F, std::max(64, cfg.grids.n_s / 8),
                                {cfg.grids.n_steps});
  std::vector<std::pair<double, std::vector<BandInterval>>> table;
  const double E_max = cfg.E_F * 1.5 + 10.0;
  for (int i = 0; i <= 8; ++i) {
    const double s = cfg.potential.T * (double)i / 8.0;
    table.emplace_back(s, band_edges(cfg.potential, s, E_max, cert.n, {}));
  }
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "bands.csv", bands_csv(table));
  write_file(dir / "certificate.json", certificate_json(cert));
  std::cout << "gap " << cert.n << " certified at E_F = " << io::fmt(cfg.E_F)
            << " (margin " << io::fmt(cert.margin) << ")\n"
            << "wrote " << (dir / "bands.csv").string() << "\n"
            << "wrote " << (dir / "certificate.json").string() << "\n";
  return 0;
}

int cmd_chern(const RunConfig& cfg) {
  const auto cert = certify_gap(cfg.potential, cfg.E_F, std::max(64, cfg.grids.n_s / 8),
                                {cfg.grids.n_steps});
  if (cert.n != cfg.n_filled)
    throw GapClosureError("chern: certificate covers gap " + std::to_string(cert.n) +
                          " but n_filled = " + std::to_string(cfg.n_filled));
  const auto grid = compute_bloch_grid(cfg.potential, cfg.n_filled, cfg.grids.N_k,
                                       cfg.grids.N_s, cfg.grids.M_pw);
  const auto res = chern_from_grid(grid);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "chern.json", chern_json(res));
  write_file(dir / "band_surface.csv", band_surface_csv(grid, cfg.n_filled + 2));
  std::cout << "chern total = " << res.total << "\n"
            << "wrote " << (dir / "chern.json").string() << "\n"
            << "wrote " << (dir / "band_surface.csv").string() << "\n";
  return 0;
}

int cmd_winding(const RunConfig& cfg) {
  const auto cert = certify_gap(cfg.potential, cfg.E_F, std::max(64, cfg.grids.n_s / 8),
                                {cfg.grids.n_steps});
  const auto fermi = FermiPoint::from_energy(cfg.E_F);
  const auto track = phase_loop(cfg.potential, fermi, cert, GapBranch::Minus, 64,
                                cfg.grids.n_steps);
  const int nodes = node_count(cfg.potential, fermi, cert, -1.0, 256, cfg.grids.n_steps);
  const auto rows = node_trajectories(cfg.potential, fermi, cert, -1.0, 128, 256,
                                      cfg.grids.n_steps);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "u_minus_loop.csv", phase_track_csv(track));
  write_file(dir / "node_trajectories.csv", node_trajectories_csv(rows));
  io::JsonObject j;
  j.add("winding_u_minus", track.winding);
  j.add("node_count", nodes);
  j.add("max_step_arg", track.max_step_arg);
  j.add("winding_residual", track.winding_residual);
  write_file(dir / "winding.json", j.str() + "\n");
  std::cout << "winding(u_minus) = " << track.winding << ", node count = " << nodes << "\n"
            << "wrote " << (dir / "u_minus_loop.csv").string() << "\n"
            << "wrote " << (dir / "node_trajectories.csv").string() << "\n"
            << "wrote " << (dir / "winding.json").string() << "\n";
  return 0;
}

int cmd_scatter(const RunConfig& cfg) {
  const auto cert = certify_gap(cfg.potential, cfg.E_F, std::max(64, cfg.grids.n_s / 8),
                                {cfg.grids.n_steps});
  const auto fermi = FermiPoint::from_energy(cfg.E_F);
  const auto study = convergence_study(cfg.potential, fermi, cert, cfg.N_list, 128,
                                       cfg.grids.n_steps);
  // per-(N, s) closed-form table on a coarse cycle grid
  std::vector<ScatteringMatrix> samples;
  std::vector<double> s_values;
  std::vector<cplx> u_minus;
  const int n_s_table = 32;
  for (int N : cfg.N_list) {
    for (int i = 0; i < n_s_table; ++i) {
      const double s = cfg.potential.T * (double)i / (double)n_s_table;
      const auto g = gap_solutions(cfg.potential, fermi, cert, s, cfg.grids.n_steps);
      samples.push_back(s_matrix_closed_form(g, fermi, N, cfg.potential.L));
      s_values.push_back(s);
      u_minus.push_back(g.u_minus);
    }
  }
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "scatter.csv", scatter_csv(samples, s_values, u_minus));
  write_file(dir / "convergence.csv", convergence_csv(study));
  io::JsonObject j;
  j.add("kappa_min_L", study.kappa_min_L);
  j.add("fitted_rate_r", study.fitted_rate_r);
  j.add("fitted_rate_t", study.fitted_rate_t);
  j.add("rel_err_r", study.rel_err_r);
  j.add("rel_err_t", study.rel_err_t);
  write_file(dir / "scatter.json", j.str() + "\n");
  std::cout << "fitted reflection-deviation rate " << io::fmt(study.fitted_rate_r)
            << " vs 2 kappa_min L = " << io::fmt(2.0 * study.kappa_min_L) << "\n"
            << "wrote " << (dir / "scatter.csv").string() << "\n"
            << "wrote " << (dir / "convergence.csv").string() << "\n"
            << "wrote " << (dir / "scatter.json").string() << "\n";
  return 0;
}

int cmd_pump(const RunConfig& cfg) {
  const auto rep = compare(cfg.potential, cfg.E_F, cfg.n_filled, cfg.N_list, cfg.grids);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "charge_series.csv", charge_series_csv(rep));
  io::JsonObject j;
  j.add("Q1_of_N", io::pair_series(rep.Q1_of_N));
  j.add("varQ1_of_N", io::pair_series(rep.varQ1_of_N));
  j.add("q_residual", rep.q_residual);
  j.add("winding_u_minus", rep.winding_u_minus);
  write_file(dir / "pump.json", j.str() + "\n");
  std::cout << "Q1(N=" << rep.Q1_of_N.back().first << ") = "
            << io::fmt(rep.Q1_of_N.back().second) << "\n"
            << "wrote " << (dir / "charge_series.csv").string() << "\n"
            << "wrote " << (dir / "pump.json").string() << "\n";
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const auto rep = compare(cfg.potential, cfg.E_F, cfg.n_filled, cfg.N_list, cfg.grids);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", pump_report_json(rep));
  write_file(dir / "charge_series.csv", charge_series_csv(rep));
  std::cout << "chern = " << rep.chern_total << ", nodes = " << rep.node_count
            << ", winding = " << rep.winding_u_minus << ", |Q1(N_max) + winding| = "
            << io::fmt(rep.q_residual) << "\n"
            << "identity verdict: " << (rep.identity_verdict ? "true" : "false") << "\n";
  if (!rep.identity_verdict) std::cout << "  " << rep.failure << "\n";
  std::cout << "wrote " << (dir / "report.json").string() << "\n"
            << "wrote " << (dir / "charge_series.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1-D adiabatic charge pumps: bands, Chern numbers, gap-state windings,\n"
               "truncated-pump scattering and pumped charge"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration")->expected(1);
  app.add_option("--out", out_dir, "output directory (overrides config)")->expected(1);
  app.add_option("--preset", preset,
                 "start from a built-in preset configuration "
                 "(sliding_cosine | two_harmonic_pump)")
      ->expected(1);
  app.add_option("--override", overrides,
                 "config override as dotted key=value, e.g. grids.N_k=48");

  auto* sub_bands = app.add_subcommand("bands", "band/gap table and gap certificate");
  auto* sub_chern = app.add_subcommand("chern", "Chern numbers of the filled bands");
  auto* sub_winding = app.add_subcommand("winding", "u_minus loop, winding and node count");
  auto* sub_scatter = app.add_subcommand("scatter", "truncated-pump S-matrix convergence");
  auto* sub_pump = app.add_subcommand("pump", "pumped charge and variance series");
  auto* sub_compare = app.add_subcommand("compare", "full comparison report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    json cfg_json;
    if (!preset.empty()) {
      cfg_json = default_config_for_preset(preset);
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      try {
        json file_json = json::parse(in);
        if (cfg_json.is_null())
          cfg_json = std::move(file_json);
        else
          cfg_json.merge_patch(file_json);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    if (cfg_json.is_null())
      throw ConfigError("no configuration given: use --config and/or --preset");
    for (const auto& kv : overrides) apply_override(cfg_json, kv);
    if (!out_dir.empty()) cfg_json["output_dir"] = out_dir;

    const RunConfig cfg = parse_config(cfg_json);

    if (*sub_bands) return cmd_bands(cfg);
    if (*sub_chern) return cmd_chern(cfg);
    if (*sub_winding) return cmd_winding(cfg);
    if (*sub_scatter) return cmd_scatter(cfg);
    if (*sub_pump) return cmd_pump(cfg);
    if (*sub_compare) return cmd_compare(cfg);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const GapClosureError& e) {
    std::cerr << "gap error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
