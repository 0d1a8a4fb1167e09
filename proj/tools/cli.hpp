#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pointcpr::cli {

/// Runs the command line. Returns 0 on success, 2 on a usage error and 1
/// on any runtime failure; failures print one line "error[<kind>]: <reason>"
/// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pointcpr::cli
