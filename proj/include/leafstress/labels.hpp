#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace leafstress {

inline constexpr std::size_t kNumClasses = 5;

enum class StressClass { healthy, leaf_miner, rust, brown_leaf_spot, cercospora_leaf_spot };

/// Ordinal severity bins; the enum value is the rank.
enum class SeverityClass { healthy, very_low, low, high, very_high };

inline constexpr std::array<std::string_view, kNumClasses> kStressNames = {
    "healthy", "leaf_miner", "rust", "brown_leaf_spot", "cercospora_leaf_spot"};
inline constexpr std::array<std::string_view, kNumClasses> kSeverityNames = {
    "healthy", "very_low", "low", "high", "very_high"};

inline std::string_view to_string(StressClass c) { return kStressNames[static_cast<std::size_t>(c)]; }
inline std::string_view to_string(SeverityClass c) { return kSeverityNames[static_cast<std::size_t>(c)]; }

inline std::optional<StressClass> parse_stress(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kStressNames[i] == s) return static_cast<StressClass>(i);
  return std::nullopt;
}

inline std::optional<SeverityClass> parse_severity(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kSeverityNames[i] == s) return static_cast<SeverityClass>(i);
  return std::nullopt;
}

inline std::size_t rank(SeverityClass c) { return static_cast<std::size_t>(c); }

}  // namespace leafstress
