// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hierperc {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kOutputSchemaVersion = 1;

}  // namespace hierperc
