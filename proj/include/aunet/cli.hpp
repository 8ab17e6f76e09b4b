#ifndef AUNET_CLI_HPP
#define AUNET_CLI_HPP

#include <iosfwd>

namespace aunet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Subcommands gen-phantom, train, evaluate and explain. Progress goes to `out`,
/// diagnostics to `err`. Returns 0, 2 (usage or validation) or 3 (runtime failure).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace aunet

#endif  // AUNET_CLI_HPP
