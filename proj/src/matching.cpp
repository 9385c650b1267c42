#include "ccdet/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ccdet/errors.hpp"

namespace ccdet {

namespace {

// Shortest augmenting path with potentials; requires rows <= cols.
std::vector<std::size_t> solve_wide(const CostMatrix& a) {
  const std::size_t n = a.rows;
  const std::size_t m = a.cols;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0);    // column -> row (1-based), 0 = free
  std::vector<std::size_t> way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Keyed by position in the caller's GT span.
const BinaryMask& decoded(std::span<const GroundTruthObject> gt, std::size_t j,
                          std::map<std::size_t, BinaryMask>& cache) {
  auto it = cache.find(j);
  if (it == cache.end()) {
    it = cache.emplace(j, rle_decode(*gt[j].mask)).first;
  }
  return it->second;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  for (double c : cost.values) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("hungarian: cost matrix contains non-finite values");
    }
  }
  Assignment out;
  out.row_to_col.assign(cost.rows, std::nullopt);
  if (cost.rows == 0 || cost.cols == 0) {
    return out;
  }
  if (cost.rows <= cost.cols) {
    const auto r2c = solve_wide(cost);
    for (std::size_t r = 0; r < cost.rows; ++r) out.row_to_col[r] = r2c[r];
  } else {
    CostMatrix t(cost.cols, cost.rows);
    for (std::size_t r = 0; r < cost.rows; ++r)
      for (std::size_t c = 0; c < cost.cols; ++c) t(c, r) = cost(r, c);
    const auto c2r = solve_wide(t);
    for (std::size_t c = 0; c < cost.cols; ++c) out.row_to_col[c2r[c]] = c;
  }
  for (std::size_t r = 0; r < cost.rows; ++r) {
    if (out.row_to_col[r]) out.total_cost += cost(r, *out.row_to_col[r]);
  }
  return out;
}

void CategoryThresholds::validate() const {
  if (!(fp_iou >= 0.0 && fp_iou < tp_iou && tp_iou < 1.0)) {
    throw std::invalid_argument("thresholds must satisfy 0 <= fp_iou < tp_iou < 1");
  }
}

Category categorize(const MatchResult& match, const CategoryThresholds& t) {
  if (!match.gt_index || match.iou <= t.fp_iou) {
    return Category::FP;
  }
  const bool good_overlap = match.iou > t.tp_iou;
  if (match.class_correct) {
    return good_overlap ? Category::TP : Category::L_CC;
  }
  return good_overlap ? Category::C_CC : Category::LC_CC;
}

std::vector<MatchResult> match_image(std::span<const ClusterSummary> clusters,
                                     std::span<const GroundTruthObject> gt, IouSource source,
                                     const CategoryThresholds& thresholds) {
  const std::size_t n = clusters.size();
  const std::size_t m = gt.size();
  std::map<std::size_t, BinaryMask> gt_masks;

  CostMatrix box_iou(n, m);
  CostMatrix mask_iou(n, m, -1.0);  // -1: unavailable
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      box_iou(i, j) = iou_box(clusters[i].mean_box, gt[j].bbox);
      if (clusters[i].mean_mask && gt[j].mask) {
        mask_iou(i, j) = iou_mask(*clusters[i].mean_mask, decoded(gt, j, gt_masks));
      } else if (source == IouSource::mask) {
        throw InputError("mask IoU requested but a mask is missing for image " +
                         clusters[i].image_id);
      }
    }
  }
  const CostMatrix& chosen = source == IouSource::box ? box_iou : mask_iou;
  CostMatrix cost(n, m);
  for (std::size_t k = 0; k < cost.values.size(); ++k) cost.values[k] = 1.0 - chosen.values[k];
  const Assignment assignment = hungarian(cost);

  std::vector<MatchResult> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    MatchResult& r = out[i];
    r.image_id = clusters[i].image_id;
    r.cluster_id = clusters[i].cluster_id;
    if (const auto j = assignment.row_to_col[i]; j && chosen(i, *j) > thresholds.fp_iou) {
      r.gt_index = *j;
      r.iou_box_gt = box_iou(i, *j);
      if (mask_iou(i, *j) >= 0.0) r.iou_mask_gt = mask_iou(i, *j);
      r.iou = chosen(i, *j);
      r.class_correct = clusters[i].k_max == static_cast<std::size_t>(gt[*j].class_id);
    }
    r.category = categorize(r, thresholds);
  }
  return out;
}

DatasetSummary summarize(std::span<const MatchResult> matches, std::size_t gt_objects) {
  DatasetSummary s;
  s.detections = matches.size();
  s.gt_objects = gt_objects;
  std::set<std::pair<std::string, std::size_t>> matched;
  for (const MatchResult& m : matches) {
    ++s.counts[index_of(m.category)];
    if (m.gt_index) matched.emplace(m.image_id, *m.gt_index);
  }
  s.false_negatives = gt_objects >= matched.size() ? gt_objects - matched.size() : 0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    s.percentages[c] = s.detections == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(s.counts[c]) /
                                 static_cast<double>(s.detections);
  }
  return s;
}

std::optional<double> map_at_iou(std::span<const ScoredDetection> detections,
                                 std::span<const GroundTruthObject> gt, IouSource source,
                                 double threshold) {
  if (gt.empty()) {
    return std::nullopt;
  }
  if (source == IouSource::mask) {
    const bool all_masks =
        std::all_of(detections.begin(), detections.end(), [](const auto& d) { return d.mask.has_value(); }) &&
        std::all_of(gt.begin(), gt.end(), [](const auto& g) { return g.mask.has_value(); });
    if (!all_masks) return std::nullopt;
  }
  std::map<std::size_t, BinaryMask> gt_masks;
  std::set<std::size_t> classes;
  for (const auto& g : gt) classes.insert(static_cast<std::size_t>(g.class_id));

  double ap_sum = 0.0;
  for (std::size_t cls : classes) {
    std::vector<std::size_t> gt_idx;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (static_cast<std::size_t>(gt[j].class_id) == cls) gt_idx.push_back(j);
    }
    std::vector<std::size_t> det_idx;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (detections[i].class_id == cls) det_idx.push_back(i);
    }
    std::stable_sort(det_idx.begin(), det_idx.end(), [&](std::size_t a, std::size_t b) {
      return detections[a].score > detections[b].score;
    });
    std::vector<bool> taken(gt.size(), false);
    std::vector<double> precision;
    std::vector<double> recall;
    std::size_t tp = 0;
    for (std::size_t rank = 0; rank < det_idx.size(); ++rank) {
      const ScoredDetection& d = detections[det_idx[rank]];
      double best = threshold;
      std::optional<std::size_t> hit;
      for (std::size_t j : gt_idx) {
        if (taken[j] || gt[j].image_id != d.image_id) continue;
        const double iou = source == IouSource::box
                               ? iou_box(d.box, gt[j].bbox)
                               : iou_mask(*d.mask, decoded(gt, j, gt_masks));
        if (iou > best) {
          best = iou;
          hit = j;
        }
      }
      if (hit) {
        taken[*hit] = true;
        ++tp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_idx.size()));
    }
    // precision envelope, then area under the step curve
    for (std::size_t i = precision.size(); i-- > 1;) {
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    ap_sum += ap;
  }
  return ap_sum / static_cast<double>(classes.size());
}

}  // namespace ccdet
