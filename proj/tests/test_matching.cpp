#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ccdet/matching.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace ccdet;

namespace {

CostMatrix matrix(std::size_t r, std::size_t c, std::initializer_list<double> v) {
  CostMatrix m(r, c);
  std::copy(v.begin(), v.end(), m.values.begin());
  return m;
}

CostMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CostMatrix m(r, c);
  for (auto& v : m.values) v = rng() % 5 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
  return m;
}

double assignment_cost(const CostMatrix& m, const Assignment& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.row_to_col.size(); ++r)
    if (a.row_to_col[r]) s += m(r, *a.row_to_col[r]);
  return s;
}

void expect_valid(const CostMatrix& m, const Assignment& a) {
  ASSERT_EQ(a.row_to_col.size(), m.rows);
  std::vector<bool> used(m.cols, false);
  std::size_t assigned = 0;
  for (const auto& c : a.row_to_col) {
    if (!c) continue;
    ASSERT_LT(*c, m.cols);
    EXPECT_FALSE(used[*c]);
    used[*c] = true;
    ++assigned;
  }
  EXPECT_EQ(assigned, std::min(m.rows, m.cols));
}

ClusterSummary cluster(std::size_t id, BBox box, std::size_t cls) {
  ClusterSummary s;
  s.image_id = "img";
  s.cluster_id = id;
  s.size = 5;
  s.mean_box = box;
  s.k_max = cls;
  s.score = 0.9;
  return s;
}

GroundTruthObject gt(BBox box, int cls) {
  GroundTruthObject g;
  g.image_id = "img";
  g.class_id = cls;
  g.bbox = box;
  return g;
}

MatchResult match_with(double iou, bool class_ok, bool matched = true) {
  MatchResult m;
  if (matched) m.gt_index = 0;
  m.iou = iou;
  m.class_correct = class_ok;
  return m;
}

ScoredDetection det(double score, BBox box, std::size_t cls = 0) {
  ScoredDetection d;
  d.image_id = "img";
  d.class_id = cls;
  d.score = score;
  d.box = box;
  return d;
}

}  // namespace

TEST(Hungarian, TwoByTwoExample) {
  const auto m = matrix(2, 2, {1, 2, 2, 4});
  const auto a = hungarian(m);
  ASSERT_EQ(a.row_to_col.size(), 2u);
  EXPECT_EQ(a.row_to_col[0], 1u);
  EXPECT_EQ(a.row_to_col[1], 0u);
  EXPECT_DOUBLE_EQ(a.total_cost, 4.0);
}

TEST(Hungarian, DiagonalZero) {
  CostMatrix m(4, 4, 1.0);
  for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.0;
  const auto a = hungarian(m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.row_to_col[i], i);
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Hungarian, EmptyAndRectangular) {
  EXPECT_TRUE(hungarian(CostMatrix(0, 3)).row_to_col.empty());
  const auto none = hungarian(CostMatrix(2, 0));
  ASSERT_EQ(none.row_to_col.size(), 2u);
  EXPECT_FALSE(none.row_to_col[0]);
  const auto tall = matrix(3, 1, {0.5, 0.1, 0.9});
  const auto a = hungarian(tall);
  EXPECT_FALSE(a.row_to_col[0]);
  EXPECT_EQ(a.row_to_col[1], 0u);
  EXPECT_FALSE(a.row_to_col[2]);
}

TEST(Hungarian, MatchesExhaustiveMinimum) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 500; ++t) {
    const std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
    const auto m = random_matrix(rng, r, c);
    const auto a = hungarian(m);
    expect_valid(m, a);
    EXPECT_NEAR(a.total_cost, oracle::brute_force_assignment(m), 1e-12);
    EXPECT_NEAR(a.total_cost, assignment_cost(m, a), 1e-12);
  }
}

TEST(Hungarian, NoWorseThanRandomPermutations) {
  std::mt19937_64 rng(78);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng() % 7;
    const auto m = random_matrix(rng, n, n);
    const double best = hungarian(m).total_cost;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int p = 0; p < 1000; ++p) {
      std::shuffle(perm.begin(), perm.end(), rng);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += m(i, perm[i]);
      EXPECT_LE(best, s + 1e-12);
    }
  }
}

TEST(MatchImage, SingleCorrectMatch) {
  // IoU 0.65 = 65 / 100 with a box covering 65% of the GT.
  const std::vector<ClusterSummary> cs{cluster(0, {0, 0, 10, 6.5}, 1)};
  const std::vector<GroundTruthObject> g{gt({0, 0, 10, 10}, 1)};
  const auto r = match_image(cs, g, IouSource::box, {});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].gt_index, 0u);
  EXPECT_TRUE(r[0].class_correct);
  EXPECT_NEAR(r[0].iou, 0.65, 1e-12);
  EXPECT_EQ(r[0].category, Category::TP);
}

TEST(MatchImage, DuplicateBecomesFalsePositive) {
  const std::vector<ClusterSummary> cs{cluster(0, {0, 0, 10, 6}, 0), cluster(1, {0, 0, 10, 8}, 0)};
  const std::vector<GroundTruthObject> g{gt({0, 0, 10, 10}, 0)};
  const auto r = match_image(cs, g, IouSource::box, {});
  EXPECT_FALSE(r[0].gt_index);
  EXPECT_EQ(r[0].category, Category::FP);
  EXPECT_EQ(r[1].gt_index, 0u);
  EXPECT_EQ(r[1].category, Category::TP);
}

TEST(MatchImage, LowIouPairIsSevered) {
  const std::vector<ClusterSummary> cs{cluster(0, {0, 0, 10, 0.5}, 0)};
  const std::vector<GroundTruthObject> g{gt({0, 0, 10, 10}, 0)};
  const auto r = match_image(cs, g, IouSource::box, {});
  EXPECT_FALSE(r[0].gt_index);
  EXPECT_EQ(r[0].category, Category::FP);
  const auto s = summarize(r, 1);
  EXPECT_EQ(s.false_negatives, 1u);
}

TEST(MatchImage, MaskSourceUsesMaskIou) {
  auto c = cluster(0, {0, 0, 10, 10}, 0);
  c.mean_mask = synth::rect_mask(20, 20, 0, 0, 10, 5);
  auto g = gt({0, 0, 10, 10}, 0);
  g.mask = rle_encode(synth::rect_mask(20, 20, 0, 0, 10, 10));
  const std::vector<ClusterSummary> cs{c};
  const std::vector<GroundTruthObject> gs{g};
  const auto r = match_image(cs, gs, IouSource::mask, {});
  ASSERT_TRUE(r[0].iou_mask_gt);
  EXPECT_DOUBLE_EQ(*r[0].iou_mask_gt, 0.5);
  EXPECT_DOUBLE_EQ(r[0].iou, 0.5);
  EXPECT_DOUBLE_EQ(r[0].iou_box_gt, 1.0);
  EXPECT_EQ(r[0].category, Category::L_CC);
}

TEST(Categorize, Bands) {
  const CategoryThresholds t;
  EXPECT_EQ(categorize(match_with(0.65, true), t), Category::TP);
  EXPECT_EQ(categorize(match_with(0.30, true), t), Category::L_CC);
  EXPECT_EQ(categorize(match_with(0.60, false), t), Category::C_CC);
  EXPECT_EQ(categorize(match_with(0.30, false), t), Category::LC_CC);
  EXPECT_EQ(categorize(match_with(0.05, true), t), Category::FP);
  EXPECT_EQ(categorize(match_with(0.9, true, false), t), Category::FP);
  EXPECT_EQ(categorize(match_with(0.5, true), t), Category::L_CC);
  EXPECT_EQ(categorize(match_with(0.5, false), t), Category::LC_CC);
  EXPECT_EQ(categorize(match_with(0.1, true), t), Category::FP);
}

TEST(Categorize, FixtureCounts) {
  const auto f = synth::categorization_fixture();
  auto ra = match_image(f.clusters_a, f.gt_a, IouSource::box, {});
  const auto rb = match_image(f.clusters_b, {}, IouSource::box, {});
  ra.insert(ra.end(), rb.begin(), rb.end());
  EXPECT_EQ(ra.size(), 12u);
  const auto s = summarize(ra, f.gt_total);
  EXPECT_EQ(s.counts, f.expected_counts);
  EXPECT_EQ(s.false_negatives, f.expected_fn);
  EXPECT_EQ(s.detections, 12u);
  std::vector<std::size_t> seen;
  for (const auto& m : ra)
    if (m.gt_index && m.image_id == "a") seen.push_back(*m.gt_index);
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
}

TEST(Categorize, RaisingFpThresholdOnlyAddsFalsePositives) {
  const auto f = synth::categorization_fixture();
  const auto base = match_image(f.clusters_a, f.gt_a, IouSource::box, {});
  for (double fp : {0.15, 0.25, 0.35, 0.45}) {
    CategoryThresholds t;
    t.fp_iou = fp;
    const auto r = match_image(f.clusters_a, f.gt_a, IouSource::box, t);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (base[i].category == Category::FP) EXPECT_EQ(r[i].category, Category::FP);
      if (r[i].category != Category::FP) EXPECT_EQ(r[i].category, base[i].category);
    }
  }
}

TEST(Summarize, Examples) {
  const auto empty = summarize({}, 0);
  EXPECT_EQ(empty.detections, 0u);
  EXPECT_EQ(empty.false_negatives, 0u);
  for (double p : empty.percentages) EXPECT_EQ(p, 0.0);

  std::vector<MatchResult> two{match_with(0.9, true), match_with(0.0, true, false)};
  two[0].category = Category::TP;
  two[1].category = Category::FP;
  const auto s = summarize(two, 1);
  EXPECT_DOUBLE_EQ(s.percentages[index_of(Category::TP)], 50.0);
  EXPECT_DOUBLE_EQ(s.percentages[index_of(Category::FP)], 50.0);
  EXPECT_EQ(s.false_negatives, 0u);
}

TEST(Summarize, PermutationInvariant) {
  const auto f = synth::categorization_fixture();
  auto r = match_image(f.clusters_a, f.gt_a, IouSource::box, {});
  const auto s = summarize(r, f.gt_total);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(r.begin(), r.end(), rng);
    const auto p = summarize(r, f.gt_total);
    EXPECT_EQ(p.counts, s.counts);
    EXPECT_EQ(p.false_negatives, s.false_negatives);
    double total = 0.0;
    for (double v : p.percentages) total += v;
    EXPECT_NEAR(total, 100.0, 1e-9);
  }
}

TEST(MeanAveragePrecision, Examples) {
  const std::vector<GroundTruthObject> one{gt({0, 0, 10, 10}, 0)};
  EXPECT_DOUBLE_EQ(*map_at_iou(std::vector{det(0.9, {0, 0, 10, 6})}, one, IouSource::box), 1.0);
  EXPECT_DOUBLE_EQ(*map_at_iou(std::vector{det(0.9, {0, 0, 10, 4})}, one, IouSource::box), 0.0);
  EXPECT_FALSE(map_at_iou(std::vector{det(0.9, {0, 0, 10, 4})}, {}, IouSource::box));

  const std::vector<GroundTruthObject> two{gt({0, 0, 10, 10}, 0), gt({50, 50, 60, 60}, 0)};
  const std::vector<ScoredDetection> ranked{det(0.9, {0, 0, 10, 10}), det(0.8, {100, 100, 110, 110}),
                                            det(0.7, {50, 50, 60, 60})};
  EXPECT_NEAR(*map_at_iou(ranked, two, IouSource::box), 5.0 / 6.0, 1e-12);
}

TEST(MeanAveragePrecision, MaskSourceNeedsMasks) {
  const std::vector<GroundTruthObject> one{gt({0, 0, 10, 10}, 0)};
  EXPECT_FALSE(map_at_iou(std::vector{det(0.9, {0, 0, 10, 10})}, one, IouSource::mask));
}

TEST(Thresholds, Validation) {
  CategoryThresholds t;
  t.fp_iou = 0.6;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}
