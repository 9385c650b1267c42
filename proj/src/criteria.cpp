#include "ccdet/criteria.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ccdet/errors.hpp"

namespace ccdet {

namespace {

void require_pair(std::size_t n) {
  if (n < 2) {
    throw SingletonClusterError("criteria need at least two cluster members, got " +
                                std::to_string(n));
  }
}

void require_same_grid(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.grid != q.grid || p.probs.size() != p.grid.size() || q.probs.size() != q.grid.size()) {
    throw std::invalid_argument("distributions are defined on different grids");
  }
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> smoothed(const std::vector<double>& p, double eps) {
  std::vector<double> out(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] + eps;
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

// sum q ((1 + d) log1p(d) - d), d = p / q - 1; every term is non-negative.
double kl_raw(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = (p[i] - q[i]) / q[i];
    s += q[i] * ((1.0 + d) * std::log1p(d) - d);
  }
  return std::max(0.0, s);
}

}  // namespace

double mean_of(std::span<const double> v) {
  // Shifted by the first value so identical inputs give an exact mean.
  const double ref = v.front();
  double s = 0.0;
  for (double x : v) s += x - ref;
  return ref + s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ClassScoreCriteria class_score_criteria(std::span<const std::vector<double>> scores) {
  require_pair(scores.size());
  const std::size_t k = scores.front().size();
  if (k < 2) {
    throw std::invalid_argument("class score vectors need at least two classes");
  }
  std::vector<double> means(k, 0.0);
  std::vector<double> column(scores.size());
  std::vector<double> stds(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[j].size() != k) {
        throw std::invalid_argument("class score vectors differ in length");
      }
      column[j] = scores[j][c];
    }
    means[c] = mean_of(column);
    stds[c] = sample_std(column, means[c]);
  }
  ClassScoreCriteria out;
  out.k_max = static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
  out.k_2nd = out.k_max == 0 ? 1 : 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (c != out.k_max && means[c] > means[out.k_2nd]) out.k_2nd = c;
  }
  out.mean_max = means[out.k_max];
  out.std_max = stds[out.k_max];
  out.mean_2nd = means[out.k_2nd];
  out.std_2nd = stds[out.k_2nd];
  return out;
}

ClassScoreCriteria class_score_criteria(const Cluster& cluster) {
  std::vector<std::vector<double>> scores;
  scores.reserve(cluster.size());
  for (const auto& m : cluster.members) scores.push_back(m.class_scores);
  return class_score_criteria(scores);
}

BoxCriteria box_criteria(std::span<const BBox> boxes) {
  require_pair(boxes.size());
  const std::size_t n = boxes.size();
  // components: x1, y1, x2, y2, cx, cy, w, h
  std::array<std::vector<double>, 8> comp;
  for (auto& c : comp) c.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const BBox& b = boxes[j];
    const BBoxCwh c = to_cwh(b);
    comp[0][j] = b.x1;
    comp[1][j] = b.y1;
    comp[2][j] = b.x2;
    comp[3][j] = b.y2;
    comp[4][j] = c.cx;
    comp[5][j] = c.cy;
    comp[6][j] = c.w;
    comp[7][j] = c.h;
  }
  BoxCriteria out;
  std::array<double, 8> means{};
  for (std::size_t i = 0; i < 8; ++i) {
    means[i] = mean_of(comp[i]);
    out.sigma_raw[i] = sample_std(comp[i], means[i]);
  }
  out.mean_box = {means[0], means[1], means[2], means[3]};
  const double mean_w = means[6];
  const double mean_h = means[7];
  if (!(mean_w > 0.0) || !(mean_h > 0.0)) {
    throw DegenerateClusterError("mean box has non-positive width or height");
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const bool x_type = (i == 0 || i == 2 || i == 4 || i == 6);
    out.sigma[i] = out.sigma_raw[i] / (x_type ? mean_w : mean_h);
  }
  out.member_ious.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.member_ious[j] = iou_box(boxes[j], out.mean_box);
  out.iou_mean = mean_of(out.member_ious);
  out.iou_std = sample_std(out.member_ious, out.iou_mean);
  return out;
}

BoxCriteria box_criteria(const Cluster& cluster) {
  std::vector<BBox> boxes;
  boxes.reserve(cluster.size());
  for (const auto& m : cluster.members) boxes.push_back(m.bbox);
  return box_criteria(boxes);
}

BinaryMask mean_mask(std::span<const BinaryMask> masks) {
  if (masks.empty()) {
    throw std::invalid_argument("mean_mask of an empty set");
  }
  const std::size_t w = masks.front().width();
  const std::size_t h = masks.front().height();
  std::vector<std::uint32_t> votes(w * h, 0);
  for (const BinaryMask& m : masks) {
    if (m.width() != w || m.height() != h) {
      throw DimensionMismatchError("cluster masks differ in size");
    }
    const auto words = m.words();
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
      std::uint64_t bits = words[wi];
      while (bits != 0) {
        ++votes[wi * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
        bits &= bits - 1;
      }
    }
  }
  BinaryMask out(w, h);
  const std::size_t n = masks.size();
  for (std::size_t i = 0; i < votes.size(); ++i) {
    // votes / n > 0.5
    if (2 * static_cast<std::size_t>(votes[i]) > n) out.set(i % w, i / w);
  }
  return out;
}

MaskCriteria mask_criteria(std::span<const BinaryMask> masks) {
  require_pair(masks.size());
  const std::size_t n = masks.size();
  MaskCriteria out;
  out.mean_mask = mean_mask(masks);

  std::vector<BBoxCwh> boxes(n);
  std::vector<double> areas(n);
  for (std::size_t j = 0; j < n; ++j) {
    areas[j] = static_cast<double>(mask_area(masks[j]));
    if (areas[j] == 0.0) {
      throw MaskDegenerateError("cluster member " + std::to_string(j) + " has an empty mask");
    }
    boxes[j] = mask_bbox(masks[j]);
  }
  if (mask_area(out.mean_mask) == 0) {
    throw MaskDegenerateError("mean mask is empty");
  }
  out.mean_mask_box = mask_bbox(out.mean_mask);

  // Deviations are taken from the box of the mean mask.
  const std::array<double, 4> centre = {out.mean_mask_box.cx, out.mean_mask_box.cy,
                                        out.mean_mask_box.w, out.mean_mask_box.h};
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (const BBoxCwh& b : boxes) {
      const std::array<double, 4> v = {b.cx, b.cy, b.w, b.h};
      s += (v[i] - centre[i]) * (v[i] - centre[i]);
    }
    out.sigma_box_raw[i] = std::sqrt(s / static_cast<double>(n - 1));
    const bool x_type = (i == 0 || i == 2);
    out.sigma_box[i] = out.sigma_box_raw[i] / (x_type ? out.mean_mask_box.w : out.mean_mask_box.h);
  }

  out.member_ious.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.member_ious[j] = iou_mask(masks[j], out.mean_mask);
  out.iou_mean = mean_of(out.member_ious);
  out.iou_std = sample_std(out.member_ious, out.iou_mean);

  out.area_mean = mean_of(areas);
  out.area_std_raw = sample_std(areas, out.area_mean);
  out.area_std_norm = out.area_std_raw / out.area_mean;
  return out;
}

MaskCriteria mask_criteria(const Cluster& cluster) {
  std::vector<BinaryMask> masks;
  masks.reserve(cluster.size());
  for (const auto& m : cluster.members) {
    if (!m.mask) {
      throw MaskDegenerateError("cluster member without a mask");
    }
    masks.push_back(rle_decode(*m.mask));
  }
  return mask_criteria(masks);
}

void KdeConfig::validate() const {
  if (grid_size < 2) throw std::invalid_argument("kde grid_size must be at least 2");
  if (bandwidth && !(*bandwidth > 0.0)) throw std::invalid_argument("kde bandwidth must be > 0");
  if (!(min_bandwidth > 0.0)) throw std::invalid_argument("kde min_bandwidth must be > 0");
  if (!(kl_epsilon > 0.0)) throw std::invalid_argument("kl_epsilon must be > 0");
}

double silverman_bandwidth(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("bandwidth of an empty sample");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double sigma = sample_std(sorted, mean_of(sorted));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sigma, iqr / 1.34);
  if (!(spread > 0.0)) spread = sigma;
  return 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
}

DiscreteDistribution kde_pdf(std::span<const double> values, const KdeConfig& config) {
  config.validate();
  if (values.empty()) {
    throw std::invalid_argument("kde_pdf of an empty sample");
  }
  const double h = std::max(config.bandwidth.value_or(silverman_bandwidth(values)),
                            config.min_bandwidth);
  const std::size_t g = config.grid_size;
  DiscreteDistribution out;
  out.grid.resize(g);
  out.probs.resize(g);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(g - 1);
    double s = 0.0;
    for (double x : values) {
      const double z = (x - t) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.grid[i] = t;
    out.probs[i] = s * norm;
    total += out.probs[i];
  }
  if (!(total > 0.0)) {
    throw std::domain_error("kde has no mass on the [0,1] grid");
  }
  for (double& p : out.probs) p /= total;
  return out;
}

double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q, double epsilon) {
  require_same_grid(p, q);
  return kl_raw(smoothed(p.probs, epsilon), smoothed(q.probs, epsilon));
}

double js_distance(const DiscreteDistribution& p, const DiscreteDistribution& q, double epsilon) {
  require_same_grid(p, q);
  DiscreteDistribution m{p.grid, std::vector<double>(p.probs.size())};
  for (std::size_t i = 0; i < m.probs.size(); ++i) m.probs[i] = 0.5 * (p.probs[i] + q.probs[i]);
  const double v = 0.5 * (kl_divergence(p, m, epsilon) + kl_divergence(q, m, epsilon));
  return std::sqrt(std::max(0.0, v));
}

double emd(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  require_same_grid(p, q);
  double cdf_p = 0.0;
  double cdf_q = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
    cdf_p += p.probs[i];
    cdf_q += q.probs[i];
    s += std::abs(cdf_p - cdf_q) * (p.grid[i + 1] - p.grid[i]);
  }
  return s;
}

CombinedCriteria combined_criteria(const BoxCriteria& box, const MaskCriteria& mask,
                                   const KdeConfig& config) {
  CombinedCriteria out;
  out.iou_mis = iou_box(box.mean_box, to_corners(mask.mean_mask_box));
  out.p_box = kde_pdf(box.member_ious, config);
  out.p_mask = kde_pdf(mask.member_ious, config);
  out.kl_b_m = kl_divergence(out.p_box, out.p_mask, config.kl_epsilon);
  out.kl_m_b = kl_divergence(out.p_mask, out.p_box, config.kl_epsilon);
  out.js = js_distance(out.p_box, out.p_mask, config.kl_epsilon);
  out.emd = emd(out.p_box, out.p_mask);
  return out;
}

FeatureResult feature_vector(const Cluster& cluster, const FeatureConfig& config) {
  namespace f = feature;
  FeatureResult out;
  auto& v = out.values;
  BoxCriteria box;
  try {
    const ClassScoreCriteria cls = class_score_criteria(cluster);
    v[0] = cls.mean_max;
    v[1] = cls.std_max;
    v[2] = cls.mean_2nd;
    v[3] = cls.std_2nd;
    box = box_criteria(cluster);
  } catch (const DegenerateClusterError& e) {
    out.values.fill(0.0);
    out.status = FeatureStatus::undefined;
    out.note = e.what();
    return out;
  }
  for (std::size_t i = 0; i < 8; ++i) v[f::kBoxSigmaBegin + i] = box.sigma[i];
  v[f::kBoxIouMean] = box.iou_mean;
  v[f::kBoxIouStd] = box.iou_std;

  if (!config.use_masks) {
    out.status = FeatureStatus::box_only;
    out.note = "masks disabled";
    return out;
  }
  try {
    const MaskCriteria mask = mask_criteria(cluster);
    const CombinedCriteria comb = combined_criteria(box, mask, config.kde);
    for (std::size_t i = 0; i < 4; ++i) v[f::kMaskSigmaBegin + i] = mask.sigma_box[i];
    v[f::kMaskIouMean] = mask.iou_mean;
    v[f::kMaskIouStd] = mask.iou_std;
    v[f::kMaskAreaStd] = mask.area_std_norm;
    v[f::kIouMis] = comb.iou_mis;
    v[f::kKlBoxMask] = comb.kl_b_m;
    v[f::kKlMaskBox] = comb.kl_m_b;
    v[f::kJs] = comb.js;
    v[f::kEmd] = comb.emd;
  } catch (const MaskDegenerateError& e) {
    for (std::size_t i = f::kMaskSigmaBegin; i < kFeatureCount; ++i) v[i] = 0.0;
    out.status = FeatureStatus::box_only;
    out.note = e.what();
  }
  return out;
}

}  // namespace ccdet
