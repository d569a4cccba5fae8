#pragma once

namespace l1gibbs {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace l1gibbs
