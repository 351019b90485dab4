#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace distsynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// args excludes the program name, e.g. {"gen-ref", "--n", "2000", "--out", "ref.csv"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Parses a flat key=value config file into "--key=value" arguments ('#'
// starts a comment, '_' in keys reads as '-'). Throws Error(InvalidConfig)
// with the line number on malformed lines or secret-bearing keys.
std::vector<std::string> config_file_args(const std::string& path);

}  // namespace distsynth::cli
