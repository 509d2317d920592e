#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace htclip {

/// Subcommands: run, schedule, clip-verify, deff, hardness. Returns the process exit code.
int dispatch(int argc, char** argv);
/// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace htclip
