#pragma once

namespace shrinkrec {

inline constexpr const char* kVersion = "0.1.0";
// Version of the behavioural contract (PRNG rule, CSV and report layouts).
inline constexpr const char* kContractVersion = "1";

}  // namespace shrinkrec
