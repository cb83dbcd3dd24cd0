#pragma once

// The groundjudge command line: evaluate, meta, align, distill, report.

#include <iosfwd>
#include <string>
#include <vector>

namespace groundjudge {

/// args excludes the program name. Returns the process exit code: 0 when
/// outputs were written, 2 for usage and configuration errors, 3 for I/O
/// errors, 4 for malformed inputs, 1 for anything else.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace groundjudge
