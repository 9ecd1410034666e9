#pragma once

#include <iosfwd>

namespace fetal {

// Exit codes: 0 success, 1 input/config error, 2 plan error, 3 expert failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitPlan = 2;
inline constexpr int kExitExpert = 3;

// Subcommands analyze, summarize-video, eval, serve.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fetal
