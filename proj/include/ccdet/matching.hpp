#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccdet/category.hpp"
#include "ccdet/geometry.hpp"
#include "ccdet/ingest.hpp"

namespace ccdet {

// Dense row-major cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct Assignment {
  // row -> column, or nullopt for rows left unassigned (n > m).
  std::vector<std::optional<std::size_t>> row_to_col;
  double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment covering min(rows, cols) pairs.
Assignment hungarian(const CostMatrix& cost);

// What matching needs to know about a detection cluster.
struct ClusterSummary {
  std::string image_id;
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  BBox mean_box;
  std::optional<BinaryMask> mean_mask;
  std::size_t k_max = 0;
  double score = 0.0;  // mean class score of k_max
};

enum class IouSource { box, mask };

struct CategoryThresholds {
  double tp_iou = 0.5;
  double fp_iou = 0.1;

  void validate() const;
};

struct MatchResult {
  std::string image_id;
  std::size_t cluster_id = 0;
  std::optional<std::size_t> gt_index;  // index into the image's GT list
  double iou_box_gt = 0.0;
  std::optional<double> iou_mask_gt;
  bool class_correct = false;
  double iou = 0.0;  // IoU of the configured source, used for categorization
  Category category = Category::FP;
};

// Hungarian matching on 1 - IoU; pairs with IoU <= thresholds.fp_iou are severed.
std::vector<MatchResult> match_image(std::span<const ClusterSummary> clusters,
                                     std::span<const GroundTruthObject> gt, IouSource source,
                                     const CategoryThresholds& thresholds);

Category categorize(const MatchResult& match, const CategoryThresholds& thresholds);

struct DatasetSummary {
  std::array<std::size_t, kNumCategories> counts{};
  std::array<double, kNumCategories> percentages{};
  std::size_t detections = 0;
  std::size_t gt_objects = 0;
  std::size_t false_negatives = 0;
  std::optional<double> map_box;
  std::optional<double> map_mask;
};

// FN = gt_objects minus the GT objects that kept a match.
DatasetSummary summarize(std::span<const MatchResult> matches, std::size_t gt_objects);

struct ScoredDetection {
  std::string image_id;
  std::size_t class_id = 0;
  double score = 0.0;
  BBox box;
  std::optional<BinaryMask> mask;
};

// All-point interpolated AP per class, averaged over classes present in the
// ground truth. nullopt when there is no ground truth (or, for the mask
// source, when any detection or GT object lacks a mask).
std::optional<double> map_at_iou(std::span<const ScoredDetection> detections,
                                 std::span<const GroundTruthObject> gt, IouSource source,
                                 double threshold = 0.5);

}  // namespace ccdet
