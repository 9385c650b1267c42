#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace ccdet {

// Detection-side labels. FN exists only as a ground-truth count in summaries.
enum class Category : std::size_t { TP = 0, L_CC = 1, C_CC = 2, LC_CC = 3, FP = 4 };

inline constexpr std::size_t kNumCategories = 5;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::TP, Category::L_CC, Category::C_CC, Category::LC_CC, Category::FP};

constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(Category c) {
  switch (c) {
    case Category::TP: return "TP";
    case Category::L_CC: return "L_CC";
    case Category::C_CC: return "C_CC";
    case Category::LC_CC: return "LC_CC";
    case Category::FP: return "FP";
  }
  return "?";
}

constexpr std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

constexpr bool is_corner_case(Category c) {
  return c == Category::L_CC || c == Category::C_CC || c == Category::LC_CC;
}

}  // namespace ccdet
