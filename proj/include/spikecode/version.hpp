#pragma once

#include <string_view>

namespace spikecode {

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace spikecode
