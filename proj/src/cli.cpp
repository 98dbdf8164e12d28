#include "cwdd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cwdd/analysis.hpp"
#include "cwdd/config.hpp"
#include "cwdd/dressed.hpp"
#include "cwdd/experiments.hpp"

namespace cwdd {

namespace {

struct Table {
  std::vector<std::pair<std::string, std::string>> meta;  // extra `#` lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<double> values) {
    std::vector<std::string> row;
    for (double v : values) row.push_back(format_number(v));
    rows.push_back(std::move(row));
  }
};

Table series_table(const TimeSeries& s, const std::string& signal = "signal") {
  Table t;
  t.columns = {s.abscissa_name, signal, "stderr"};
  for (std::size_t k = 0; k < s.size(); ++k) t.add({s.x[k], s.mean[k], s.stderr_[k]});
  t.meta.emplace_back("trajectories", std::to_string(s.trajectories));
  return t;
}

std::vector<double> grid(const ExperimentConfig& c, double start, double stop, double step) {
  if (c.scan) return c.scan->values();
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::llround((stop - start) / step));
  for (std::size_t k = 0; k <= n; ++k) v.push_back(start + step * static_cast<double>(k));
  return v;
}

Mode parse_mode(const std::string& m) { return m == "cwdd" ? Mode::cwdd : Mode::bare; }

TimeSeries read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input " + path);
  TimeSeries s;
  std::string line;
  bool header = false;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!header) {
      if (cells.size() < 2) throw ConfigError("input needs at least two columns", number);
      s.abscissa_name = cells[0];
      header = true;
      continue;
    }
    try {
      s.x.push_back(std::stod(cells.at(0)));
      s.mean.push_back(std::stod(cells.at(1)));
      s.stderr_.push_back(cells.size() > 2 ? std::stod(cells[2]) : 0.0);
    } catch (const std::exception&) {
      throw ConfigError("malformed data row", number);
    }
  }
  return s;
}

void write_outputs(const std::string& command, const std::string& mode, const ExperimentConfig& c,
                   const Table& table, const std::string& out, double seconds) {
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + out);
  csv << "# dsim " << kVersion << '\n';
  csv << "# command = " << command << '\n';
  if (!mode.empty()) csv << "# mode = " << mode << '\n';
  for (const auto& [k, v] : config_entries(c)) csv << "# " << k << " = " << v << '\n';
  for (const auto& [k, v] : table.meta) csv << "# " << k << " = " << v << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    csv << (i ? "," : "") << table.columns[i];
  csv << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
    csv << '\n';
  }

  nlohmann::ordered_json manifest;
  manifest["command"] = command;
  if (!mode.empty()) manifest["mode"] = mode;
  manifest["version"] = kVersion;
  manifest["master_seed"] = c.noise.master_seed;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config_entries(c)) cfg[k] = v;
  manifest["config"] = cfg;
  manifest["outputs"] = {out};
  manifest["wall_clock_s"] = seconds;
  std::ofstream json(out + ".manifest.json");
  json << manifest.dump(2) << '\n';
}

}  // namespace

int run_command(int argc, char** argv) {
  CLI::App app{"Dressed-state dephasing simulator", "dsim"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out, mode_name = "bare";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::optional<std::uint64_t> shots;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--trajectories", trajectories, "noise trajectories")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output CSV (default <command>.csv)");
  app.add_option("--mode", mode_name, "bare | cwdd")->check(CLI::IsMember({"bare", "cwdd"}));
  app.add_option("--shot-noise", shots, "photon-shot repetitions per point");

  auto* spectrum = app.add_subcommand("spectrum", "dressed energies against bath field (scan = b in G)");
  double spectrum_b = 0.0;
  spectrum->add_option("--b", spectrum_b, "bath field when no scan is configured, G");

  auto* sweetspot = app.add_subcommand("sweetspot", "Omega/Delta where the b^2 term vanishes");
  std::vector<double> sweet_deltas{0.4, 2.0};
  sweetspot->add_option("--delta", sweet_deltas, "detunings, MHz");

  auto* odmr = app.add_subcommand("odmr", "bare ODMR of |0> <-> |+1> (scan = freq in MHz)");
  double probe_length = 1.0;
  odmr->add_option("--probe-length", probe_length, "probe pulse length, us");

  auto* fid = app.add_subcommand("fid", "Ramsey free induction decay (scan = delay in us)");
  double rf_offset = 0.25;
  std::optional<double> mw_detuning;
  fid->add_option("--rf-offset", rf_offset, "RF detuning from w_dg in cwdd mode, MHz");
  fid->add_option("--detuning", mw_detuning, "MW detuning in bare mode, MHz");

  auto* rabi = app.add_subcommand("rabi", "Rabi oscillation (scan = duration in us)");
  auto* notgate = app.add_subcommand("notgate", "train of NOT gates");
  int n_max = 100;
  notgate->add_option("--n-max", n_max, "number of gates")->check(CLI::NonNegativeNumber);

  auto* t2scan = app.add_subcommand("t2scan", "T2' against drive amplitude (scan = omega in MHz)");
  double window = 300.0;
  t2scan->add_option("--window", window, "longest delay, us");

  auto* fit = app.add_subcommand("fit", "fit a decay model to a CSV series");
  std::string input, model = "auto";
  fit->add_option("--input", input, "CSV with x, signal[, stderr]")->required();
  fit->add_option("--model", model, "auto | gaussian | cosine | three-tone")
      ->check(CLI::IsMember({"auto", "gaussian", "cosine", "three-tone"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  const bool uses_mode = sub == fid || sub == rabi || sub == notgate;
  if (out.empty()) out = command + ".csv";

  const auto started = std::chrono::steady_clock::now();
  try {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) c.noise.master_seed = *seed;
    if (trajectories) c.trajectories = *trajectories;
    if (shots) c.readout.shots = *shots;
    try {
      c.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    const Mode mode = parse_mode(mode_name);

    Table table;
    if (sub == spectrum) {
      table.columns = {"b_G", "E_g_MHz", "E_d_MHz", "E_e_MHz", "w_dg_MHz", "w_eg_MHz", "s_overlap"};
      const std::vector<double> bs = c.scan ? c.scan->values() : std::vector<double>{spectrum_b};
      for (double b : bs) {
        const DressedSpectrum s = dressed_spectrum(c.drive.delta, c.drive.omega, b, c.constants.gamma_e);
        table.add({b, s.E_g, s.E_d, s.E_e, s.w_dg, s.w_eg, s.s_overlap});
      }
    } else if (sub == sweetspot) {
      table.columns = {"delta_MHz", "ratio", "omega_MHz", "curvature_below_MHz_per_G2",
                       "curvature_above_MHz_per_G2"};
      for (double d : sweet_deltas) {
        const double r = find_sweet_spot_ratio(d, c.constants.gamma_e);
        table.add({d, r, r * d, gap_sensitivity(d, 0.99 * r * d, 0.0, 2, c.constants.gamma_e),
                   gap_sensitivity(d, 1.01 * r * d, 0.0, 2, c.constants.gamma_e)});
      }
    } else if (sub == odmr) {
      const double w01 = bare_spectrum(c.constants).w_01;
      const auto freqs = grid(c, w01 - 4.0, w01 + 4.0, 0.05);
      const TimeSeries s = run_odmr(c, freqs, probe_length);
      table = series_table(s);
      for (const Dip& d : find_dips(s))
        table.meta.emplace_back("dip_MHz", format_number(d.center));
    } else if (sub == fid) {
      if (mode == Mode::bare) {
        const double det = mw_detuning.value_or(c.bare.fid_detuning);
        table = series_table(run_fid_bare(c, grid(c, 0.0, 4.0, 0.02), det));
        table.meta.emplace_back("mw_detuning_MHz", format_number(det));
      } else {
        table = series_table(run_fid_cwdd(c, grid(c, 0.0, 40.0, 0.5), rf_offset));
        table.meta.emplace_back("rf_offset_MHz", format_number(rf_offset));
        table.meta.emplace_back("pi_time_us", format_number(calibrate_pi_pulse(c)));
      }
    } else if (sub == rabi) {
      const auto durations = mode == Mode::bare ? grid(c, 0.0, 30.0, 0.05) : grid(c, 0.0, 30.0, 0.25);
      table = series_table(run_rabi(c, durations, mode));
    } else if (sub == notgate) {
      const NotGateTrain train = run_not_gate_train(c, n_max, mode);
      table.columns = {"gate_count", "t_us", "F", "stderr"};
      for (std::size_t k = 0; k < train.gate_count.size(); ++k)
        table.add({static_cast<double>(train.gate_count[k]), train.indicator.x[k],
                   train.indicator.mean[k], train.indicator.stderr_[k]});
      table.meta.emplace_back("pi_time_us", format_number(train.pi_time));
    } else if (sub == t2scan) {
      const std::vector<double> omegas =
          c.scan ? c.scan->values() : std::vector<double>{0.2, 1, 2, 3, 5, 7, 10};
      table.columns = {"omega_MHz", "t2prime_us", "uncertainty_us", "decayed"};
      for (const T2PrimePoint& p : run_t2prime_scan(c, omegas, t2prime_delays(window)))
        table.add({p.omega, p.t2_prime, p.uncertainty, p.decayed ? 1.0 : 0.0});
    } else if (sub == fit) {
      const TimeSeries s = read_series(input);
      const FitResult r = model == "gaussian"     ? fit_gaussian_decay(s)
                          : model == "cosine"     ? fit_damped_cosine(s)
                          : model == "three-tone" ? fit_three_tone(s)
                                                  : fit_gaussian_decay(s);
      table.columns = {"parameter", "value", "uncertainty"};
      for (std::size_t k = 0; k < r.names.size(); ++k)
        table.rows.push_back({r.names[k], format_number(r.values(static_cast<Eigen::Index>(k))),
                              format_number(r.uncertainties(static_cast<Eigen::Index>(k)))});
      table.meta.emplace_back("model", r.model);
      table.meta.emplace_back("residual_rms", format_number(r.residual_rms));
      table.meta.emplace_back("converged", r.converged ? "true" : "false");
      if (!r.converged) throw FitError("fit did not converge");
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_outputs(command, uses_mode ? mode_name : "", c, table, out, seconds);
    std::cout << out << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "dsim: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dsim: " << e.what() << '\n';
    return 3;
  }
}

int run_command(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"dsim"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run_command(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cwdd
