#pragma once

namespace ssrcps {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ssrcps
