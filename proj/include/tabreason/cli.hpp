#pragma once

namespace tabreason {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `tabreason` tool. Returns the process exit code.
int dispatch(int argc, const char* const* argv);

} // namespace tabreason
