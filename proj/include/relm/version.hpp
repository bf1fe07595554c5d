#pragma once

namespace relm {
inline constexpr const char* kVersion = "0.1.0";
}
