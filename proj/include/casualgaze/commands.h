#ifndef CASUALGAZE_COMMANDS_H_
#define CASUALGAZE_COMMANDS_H_

#include <iosfwd>
#include <string_view>

#include "casualgaze/error.h"
#include "casualgaze/simulator.h"

namespace casualgaze {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

int ExitCodeFor(ErrorCode code);

// "normal=0.8,overshoot=0.1,undershoot=0.1", "0.8,0.1,0.1" or a single
// profile name. Throws kInvalidProfile.
ProfileMix ParseProfileMix(std::string_view text);

// Entry point for the casualgaze tool. Subcommands: simulate, evaluate, fit,
// predict, serve. |in| feeds predict; serve blocks until SIGINT or SIGTERM.
int RunCli(int argc, const char* const* argv, std::istream& in,
           std::ostream& out, std::ostream& err);

}  // namespace casualgaze

#endif  // CASUALGAZE_COMMANDS_H_
