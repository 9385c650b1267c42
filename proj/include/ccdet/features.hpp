#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace ccdet {

inline constexpr std::size_t kFeatureCount = 26;

// Canonical criteria order, also the feature-table column names.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "class_mean_max", "class_std_max", "class_mean_2nd", "class_std_2nd",
    "box_std_x1",     "box_std_y1",    "box_std_x2",     "box_std_y2",
    "box_std_cx",     "box_std_cy",    "box_std_w",      "box_std_h",
    "box_iou_mean",   "box_iou_std",   "mask_std_cx",    "mask_std_cy",
    "mask_std_w",     "mask_std_h",    "mask_iou_mean",  "mask_iou_std",
    "mask_area_std",  "iou_mis",       "kl_b_m",         "kl_m_b",
    "js",             "emd"};

namespace feature {
inline constexpr std::size_t kClassBegin = 0;
inline constexpr std::size_t kBoxSigmaBegin = 4;
inline constexpr std::size_t kBoxIouMean = 12;
inline constexpr std::size_t kBoxIouStd = 13;
inline constexpr std::size_t kMaskSigmaBegin = 14;
inline constexpr std::size_t kMaskIouMean = 18;
inline constexpr std::size_t kMaskIouStd = 19;
inline constexpr std::size_t kMaskAreaStd = 20;
inline constexpr std::size_t kIouMis = 21;
inline constexpr std::size_t kKlBoxMask = 22;
inline constexpr std::size_t kKlMaskBox = 23;
inline constexpr std::size_t kJs = 24;
inline constexpr std::size_t kEmd = 25;
}  // namespace feature

using CriteriaVector = std::array<double, kFeatureCount>;

constexpr std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace ccdet
