#ifndef SHEARLAB_TOOLS_CLI_HPP
#define SHEARLAB_TOOLS_CLI_HPP

#include <iosfwd>

namespace shearlab::cli {

/// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

/// Entry point of the shearlab executable, callable in-process. Summary
/// lines go to `out`; help, usage errors and the error JSON go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shearlab::cli

#endif  // SHEARLAB_TOOLS_CLI_HPP
