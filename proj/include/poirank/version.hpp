#pragma once

namespace poirank {

inline constexpr const char* kToolName = "poirank";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace poirank
