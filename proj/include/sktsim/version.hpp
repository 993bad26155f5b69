#pragma once

namespace sktsim {
inline constexpr const char* version = "0.1.0";
}
