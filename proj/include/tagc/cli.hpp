#pragma once
// Programmatic entry point for the command-line tool, so tests can drive
// commands in-process. Exit codes: 0 success, 1 invariant failure, 2 usage or
// config error.

#include <ostream>
#include <string>
#include <vector>

namespace tagc {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tagc
