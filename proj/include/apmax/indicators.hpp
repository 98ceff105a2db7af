// Fixed indicator and category vocabulary shared by every module.
//
// The 14 indicators come from consultation and routine cognitive testing;
// their order is frozen because pattern bits, CSV columns and activation
// vectors all index into it positionally.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace apmax {

inline constexpr int kIndicatorCount = 14;

// Known categories; class 0 is reserved for "unknown" throughout.
enum class Category : int { Unknown = 0, AD = 1, CN = 2 };

inline constexpr int kKnownCategoryCount = 2;  // L

// Pattern dimension: one bit per (indicator, known category) pair.
inline constexpr int kPatternDim = kIndicatorCount * kKnownCategoryCount;

constexpr std::array<Category, kKnownCategoryCount> known_categories() {
    return {Category::AD, Category::CN};
}

// AD -> 0, CN -> 1 (position in activation vectors and pattern bits).
constexpr int known_index(Category c) {
    return static_cast<int>(c) - 1;
}

constexpr Category known_category_at(int index) {
    return static_cast<Category>(index + 1);
}

std::string_view to_string(Category c);

// Accepts "AD", "CN", "Unknown"; anything else is nullopt.
std::optional<Category> category_from_string(std::string_view s);

// Column names as they appear on the wire (CSV header, JSON keys,
// range-table keys). Indicator order matches the normal-range table.
const std::array<std::string_view, kIndicatorCount>& indicator_names();

std::optional<int> indicator_index(std::string_view name);

}  // namespace apmax
