#pragma once

namespace userprof {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace userprof
