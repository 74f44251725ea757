#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mediaflow {

// Runs one `mediaflow` command. `args` excludes the program name.
// Exit codes: 0 success, 1 domain error, 2 usage error (synopsis on `err`).
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mediaflow
