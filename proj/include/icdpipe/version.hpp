#pragma once

namespace icdpipe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace icdpipe
