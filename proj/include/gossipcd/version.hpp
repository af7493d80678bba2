#pragma once

namespace gossipcd {
inline constexpr const char* version = "0.1.0";
}
