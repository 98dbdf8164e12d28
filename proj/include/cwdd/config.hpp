#pragma once

// INI-style configuration. Sections mirror ExperimentConfig:
//
//   [constants] D gamma_e B_z A_hf
//   [noise]     sigma_b | t2_star, tau_c (inf allowed), sigma_eps, seed
//   [drive]     delta omega
//   [ramps]     t1 t2
//   [rf]        b_rf f_rf (auto = noiseless w_dg)
//   [nuclear]   mode (auto | single | mixture), m_I
//   [bare]      pulse_omega hard_pulse_omega fid_detuning
//   [readout]   contrast shots
//   [run]       trajectories threads
//   [scan]      start stop points
//
// Missing keys keep their defaults.

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "cwdd/experiments.hpp"

namespace cwdd {

// ConfigError with the offending line for syntax errors, and the key name
// for unknown keys, malformed values and violated invariants.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every field as ("section.key", value) in a fixed order; values print with
// round-trip precision, so writing them back reproduces the config.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

std::string format_config(const ExperimentConfig& config);

std::string format_number(double value);

}  // namespace cwdd
