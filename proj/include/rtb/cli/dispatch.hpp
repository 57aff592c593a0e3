#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rtb/cli/run_config.hpp"

namespace rtb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Subcommand names, in help order.
const std::vector<std::string>& subcommands();

// Settings a subcommand accepts (flags and config-file keys). "ctr train" and
// "ctr score" are addressed by their full name; both read the [ctr] file section.
std::vector<Knob> knobs_for(const std::string& command);

// Parses argv, resolves the RunConfig and runs the subcommand. Exit codes: 0 ok,
// 1 usage or configuration error, 2 data error, 3 numerical abort.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Runs an already-resolved configuration (used by dispatch and by tests).
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace rtb::cli
