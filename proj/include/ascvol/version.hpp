#pragma once

#include <string_view>

namespace ascvol {

inline constexpr std::string_view kToolName = "ascvol";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace ascvol
