#pragma once

namespace tablere {

inline constexpr const char* kVersion = "0.1.0";

} // namespace tablere
