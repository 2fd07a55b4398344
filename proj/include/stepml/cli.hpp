#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stepml {

/// The command-line driver. Program output goes to `out`, the trace and
/// diagnostics to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            bool err_is_terminal = false);

/// Runs against the real standard streams.
int main_entry(int argc, char** argv);

}  // namespace stepml
