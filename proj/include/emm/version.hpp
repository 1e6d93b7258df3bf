#pragma once

namespace emm {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace emm
