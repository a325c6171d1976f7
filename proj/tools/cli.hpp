#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dpe::cli {

/// Exit codes of the deeppe tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;  // library error, printed as error[CODE]
inline constexpr int kExitUsage = 2;  // bad flags

/// Runs one deeppe invocation. args[0] is the program name. Results go to
/// `out`; failures print one "error[CODE]: message" line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpe::cli
