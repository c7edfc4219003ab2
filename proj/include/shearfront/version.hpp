#pragma once

namespace shearfront {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace shearfront
