#pragma once

namespace xstab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace xstab
