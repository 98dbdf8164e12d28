#pragma once

#include <string>
#include <vector>

namespace cwdd {

inline constexpr const char* kVersion = "1.0.0";

// Entry point of `dsim`. Exit codes: 0 success, 2 config or flag error,
// 3 simulation or fit error. Writes the CSV to --out and a JSON manifest
// next to it.
int run_command(int argc, char** argv);
int run_command(const std::vector<std::string>& args);

}  // namespace cwdd
