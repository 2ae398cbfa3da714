#pragma once

#include <string_view>

namespace advcf {

enum class Diagnosis { CN = 0, AD = 1 };

inline constexpr double label_of(Diagnosis d) { return d == Diagnosis::AD ? 1.0 : 0.0; }
inline constexpr std::string_view diagnosis_name(Diagnosis d) { return d == Diagnosis::AD ? "AD" : "CN"; }

/// Clipping range of target ages, in years.
inline constexpr double kMinAge = 60.0;
inline constexpr double kMaxAge = 90.0;
inline constexpr double kAgeSpan = kMaxAge - kMinAge;

}  // namespace advcf
