#pragma once

namespace bas {

inline constexpr const char *kVersion = "0.1.0";

#if defined(__VERSION__)
inline constexpr const char *kCompilerInfo = __VERSION__;
#else
inline constexpr const char *kCompilerInfo = "unknown";
#endif

}  // namespace bas
