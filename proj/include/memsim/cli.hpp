#pragma once

#include <string>
#include <vector>

namespace memsim {

/// Command-line front end. Exit codes: 0 success, 1 usage/configuration,
/// 2 netlist parse or flatten failure, 3 solver failure.
int run_cli(const std::vector<std::string>& args);

} // namespace memsim
