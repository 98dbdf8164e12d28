#include "cwdd/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cwdd {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"constants", {"D", "gamma_e", "B_z", "A_hf"}},
      {"noise", {"sigma_b", "t2_star", "tau_c", "sigma_eps", "seed"}},
      {"drive", {"delta", "omega"}},
      {"ramps", {"t1", "t2"}},
      {"rf", {"b_rf", "f_rf"}},
      {"nuclear", {"mode", "m_I"}},
      {"bare", {"pulse_omega", "hard_pulse_omega", "fid_detuning"}},
      {"readout", {"contrast", "shots"}},
      {"run", {"trajectories", "threads"}},
      {"scan", {"start", "stop", "points"}},
  };
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

std::size_t to_count(const std::string& key, const std::string& text, long long min) {
  const long long v = to_integer(key, text);
  if (v < min) throw ConfigError(key + ": must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

void apply(ExperimentConfig& c, const std::string& section, const std::string& key,
           const std::string& value, bool& have_sigma_b, bool& have_t2_star) {
  const std::string name = section + "." + key;
  auto num = [&] { return to_double(name, value); };
  if (section == "constants") {
    if (key == "D") c.constants.D = num();
    if (key == "gamma_e") c.constants.gamma_e = num();
    if (key == "B_z") c.constants.B_z = num();
    if (key == "A_hf") c.constants.A_hf = num();
  } else if (section == "noise") {
    if (key == "sigma_b") { c.noise.sigma_b = num(); have_sigma_b = true; }
    if (key == "t2_star") { c.noise.sigma_b = num(); have_t2_star = true; }  // converted below
    if (key == "tau_c") c.noise.tau_c = num();
    if (key == "sigma_eps") c.noise.sigma_eps = num();
    if (key == "seed") c.noise.master_seed = to_count(name, value, 0);
  } else if (section == "drive") {
    if (key == "delta") c.drive.delta = num();
    if (key == "omega") c.drive.omega = num();
  } else if (section == "ramps") {
    if (key == "t1") c.ramps.t1 = num();
    if (key == "t2") c.ramps.t2 = num();
  } else if (section == "rf") {
    if (key == "b_rf") c.rf.b_rf = num();
    if (key == "f_rf") {
      if (value == "auto") c.rf.f_rf.reset();
      else c.rf.f_rf = num();
    }
  } else if (section == "nuclear") {
    if (key == "mode") {
      if (value == "auto") c.nuclear.mode = NuclearMode::automatic;
      else if (value == "single") c.nuclear.mode = NuclearMode::single;
      else if (value == "mixture") c.nuclear.mode = NuclearMode::mixture;
      else throw ConfigError(name + ": expected auto, single or mixture");
    }
    if (key == "m_I") c.nuclear.m_I = static_cast<int>(to_integer(name, value));
  } else if (section == "bare") {
    if (key == "pulse_omega") c.bare.pulse_omega = num();
    if (key == "hard_pulse_omega") c.bare.hard_pulse_omega = num();
    if (key == "fid_detuning") c.bare.fid_detuning = num();
  } else if (section == "readout") {
    if (key == "contrast") c.readout.contrast = num();
    if (key == "shots") c.readout.shots = to_count(name, value, 0);
  } else if (section == "run") {
    if (key == "trajectories") c.trajectories = to_count(name, value, 1);
    if (key == "threads") c.threads = static_cast<unsigned>(to_count(name, value, 0));
  } else if (section == "scan") {
    if (!c.scan) c.scan = ScanGrid{};
    if (key == "start") c.scan->start = num();
    if (key == "stop") c.scan->stop = num();
    if (key == "points") c.scan->points = to_count(name, value, 1);
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message(), static_cast<int>(e.line()));
  }

  ExperimentConfig c;
  bool have_sigma_b = false, have_t2_star = false;
  for (const auto& [section, body] : tree) {
    const auto known = schema().find(section);
    if (known == schema().end()) {
      if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) throw ConfigError("unknown key " + section + "." + key);
      apply(c, section, key, value.data(), have_sigma_b, have_t2_star);
    }
  }
  if (have_sigma_b && have_t2_star)
    throw ConfigError("noise: give either sigma_b or t2_star, not both");
  try {
    if (have_t2_star) c.noise.sigma_b = calibrate_bath(c.noise.sigma_b, c.constants);
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  auto n = format_number;
  auto u = [](auto v) { return std::to_string(v); };
  const char* mode = c.nuclear.mode == NuclearMode::single    ? "single"
                     : c.nuclear.mode == NuclearMode::mixture ? "mixture"
                                                              : "auto";
  std::vector<std::pair<std::string, std::string>> e = {
      {"constants.D", n(c.constants.D)},
      {"constants.gamma_e", n(c.constants.gamma_e)},
      {"constants.B_z", n(c.constants.B_z)},
      {"constants.A_hf", n(c.constants.A_hf)},
      {"noise.sigma_b", n(c.noise.sigma_b)},
      {"noise.tau_c", n(c.noise.tau_c)},
      {"noise.sigma_eps", n(c.noise.sigma_eps)},
      {"noise.seed", u(c.noise.master_seed)},
      {"drive.delta", n(c.drive.delta)},
      {"drive.omega", n(c.drive.omega)},
      {"ramps.t1", n(c.ramps.t1)},
      {"ramps.t2", n(c.ramps.t2)},
      {"rf.b_rf", n(c.rf.b_rf)},
      {"rf.f_rf", c.rf.f_rf ? n(*c.rf.f_rf) : "auto"},
      {"nuclear.mode", mode},
      {"nuclear.m_I", std::to_string(c.nuclear.m_I)},
      {"bare.pulse_omega", n(c.bare.pulse_omega)},
      {"bare.hard_pulse_omega", n(c.bare.hard_pulse_omega)},
      {"bare.fid_detuning", n(c.bare.fid_detuning)},
      {"readout.contrast", n(c.readout.contrast)},
      {"readout.shots", u(c.readout.shots)},
      {"run.trajectories", u(c.trajectories)},
  };
  if (c.scan) {
    e.emplace_back("scan.start", n(c.scan->start));
    e.emplace_back("scan.stop", n(c.scan->stop));
    e.emplace_back("scan.points", u(c.scan->points));
  }
  return e;
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream out;
  std::string current;
  for (const auto& [name, value] : config_entries(c)) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << name.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace cwdd
