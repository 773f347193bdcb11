#pragma once

namespace turnwise {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace turnwise
