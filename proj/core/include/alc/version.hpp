#pragma once

namespace alc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace alc
