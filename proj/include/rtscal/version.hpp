#pragma once

namespace rtscal {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rtscal
