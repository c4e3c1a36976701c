#pragma once

namespace abstain {

inline constexpr const char* artifact_version = "0.1.0";

}  // namespace abstain
