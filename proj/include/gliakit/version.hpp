#pragma once

namespace gliakit {

inline constexpr const char* kToolName = "gliakit";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace gliakit
