#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tic/config.hpp"

namespace tic {

std::vector<std::string> command_names();

// Runs one subcommand, writing its CSV files and summary.json under `out`.
// Returns the process exit code: 0 success, 2 configuration error,
// 3 numerical failure. Messages go to `msg`.
int run_command(const std::string& name, const RunConfig& cfg, const std::filesystem::path& out,
                std::ostream& msg);

// consistency residual of the equilibrium system on the inner half of the
// spatial domain: (Theta(t,s+ds) - Theta(t,s))/ds + H evaluated on layer s
double equilibrium_residual(const ProblemSpec& spec, const EquilibriumSolution& eq);

}  // namespace tic
