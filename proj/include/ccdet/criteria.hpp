#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccdet/clustering.hpp"
#include "ccdet/features.hpp"
#include "ccdet/geometry.hpp"
#include "ccdet/ingest.hpp"

namespace ccdet {

struct ClassScoreCriteria {
  double mean_max = 0.0;
  double std_max = 0.0;
  double mean_2nd = 0.0;
  double std_2nd = 0.0;
  std::size_t k_max = 0;
  std::size_t k_2nd = 0;
};

// sigma order: x1, y1, x2, y2, cx, cy, w, h. x-type entries are divided by
// the mean box width, y-type entries by the mean box height.
struct BoxCriteria {
  BBox mean_box;
  std::array<double, 8> sigma{};
  std::array<double, 8> sigma_raw{};
  double iou_mean = 0.0;
  double iou_std = 0.0;
  std::vector<double> member_ious;
};

// sigma_box order: cx, cy, w, h, normalized by the mean-mask box w / h.
struct MaskCriteria {
  BinaryMask mean_mask;
  BBoxCwh mean_mask_box;
  std::array<double, 4> sigma_box{};
  std::array<double, 4> sigma_box_raw{};
  double iou_mean = 0.0;
  double iou_std = 0.0;
  double area_mean = 0.0;
  double area_std_raw = 0.0;
  double area_std_norm = 0.0;
  std::vector<double> member_ious;
};

// Probability mass on an evenly spaced grid over [0, 1].
struct DiscreteDistribution {
  std::vector<double> grid;
  std::vector<double> probs;
};

struct KdeConfig {
  std::size_t grid_size = 101;
  std::optional<double> bandwidth;  // nullopt: Silverman's rule
  double min_bandwidth = 0.01;
  double kl_epsilon = 1e-10;

  void validate() const;
};

struct CombinedCriteria {
  double iou_mis = 0.0;
  double kl_b_m = 0.0;
  double kl_m_b = 0.0;
  double js = 0.0;
  double emd = 0.0;
  DiscreteDistribution p_box;
  DiscreteDistribution p_mask;
};

struct FeatureConfig {
  KdeConfig kde;
  bool use_masks = true;
};

struct FeatureResult {
  CriteriaVector values{};
  FeatureStatus status = FeatureStatus::complete;
  std::string note;  // why the row is not complete
};

// Sample mean / standard deviation with N-1 denominator.
double mean_of(std::span<const double> v);
double sample_std(std::span<const double> v, double mean);

// All throw SingletonClusterError for fewer than two members.
ClassScoreCriteria class_score_criteria(std::span<const std::vector<double>> scores);
ClassScoreCriteria class_score_criteria(const Cluster& cluster);

// Throws DegenerateClusterError when the mean width or height is not positive.
BoxCriteria box_criteria(std::span<const BBox> boxes);
BoxCriteria box_criteria(const Cluster& cluster);

// Throws MaskDegenerateError for an empty member mask or empty mean mask.
MaskCriteria mask_criteria(std::span<const BinaryMask> masks);
MaskCriteria mask_criteria(const Cluster& cluster);

// Thresholded per-pixel mean: a pixel is set iff it is set in more than half of the masks.
BinaryMask mean_mask(std::span<const BinaryMask> masks);

double silverman_bandwidth(std::span<const double> values);
DiscreteDistribution kde_pdf(std::span<const double> values, const KdeConfig& config);

// Natural-log KL with epsilon smoothing of both arguments.
double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q,
                     double epsilon = 1e-10);
double js_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                   double epsilon = 1e-10);
// 1-D earth mover's distance via the CDF difference.
double emd(const DiscreteDistribution& p, const DiscreteDistribution& q);

CombinedCriteria combined_criteria(const BoxCriteria& box, const MaskCriteria& mask,
                                   const KdeConfig& config);

// Never throws for degenerate clusters; reports them through `status`.
FeatureResult feature_vector(const Cluster& cluster, const FeatureConfig& config);

}  // namespace ccdet
