#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ccdet/clustering.hpp"
#include "synth.hpp"

using namespace ccdet;

namespace {

DetectionSample box_sample(double x1, double y1, double x2, double y2, std::size_t idx) {
  auto s = synth::sample("img", 0, {0.5, 0.5}, {x1, y1, x2, y2});
  s.source_index = idx;
  return s;
}

using Partition = std::set<std::set<std::size_t>>;

Partition partition_of(const std::vector<Cluster>& clusters) {
  Partition p;
  for (const auto& c : clusters) {
    std::set<std::size_t> ids;
    for (const auto& m : c.members) ids.insert(m.source_index);
    p.insert(ids);
  }
  return p;
}

// Tight groups far apart: intra IoU >= 0.9, inter IoU 0.
std::vector<DetectionSample> separated_groups(std::mt19937_64& rng, std::size_t groups, std::size_t per_group) {
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  std::vector<DetectionSample> out;
  for (std::size_t g = 0; g < groups; ++g) {
    const double x = 100.0 * static_cast<double>(g);
    for (std::size_t i = 0; i < per_group; ++i) {
      out.push_back(box_sample(x + jitter(rng), jitter(rng), x + 20 + jitter(rng), 20 + jitter(rng), out.size()));
    }
  }
  return out;
}

}  // namespace

TEST(GreedyIou, IdenticalBoxesFormOneCluster) {
  std::vector<DetectionSample> s{box_sample(0, 0, 10, 10, 0), box_sample(0, 0, 10, 10, 1)};
  const auto c = cluster_greedy_iou(s, {});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].size(), 2u);
}

TEST(GreedyIou, DisjointBoxesFormTwoClusters) {
  std::vector<DetectionSample> s{box_sample(0, 0, 1, 1, 0), box_sample(5, 5, 6, 6, 1)};
  EXPECT_EQ(cluster_greedy_iou(s, {}).size(), 2u);
}

TEST(GreedyIou, TransitiveLink) {
  // A=[0,10], B=[2.5,12.5], C=[5,15] on x, height 1: IoU(A,B)=IoU(B,C)=0.6, IoU(A,C)=1/3.
  // Shrink C's overlap with A below 0.5 while keeping B-C at 0.6.
  std::vector<DetectionSample> s{box_sample(0, 0, 10, 1, 0), box_sample(2.5, 0, 12.5, 1, 1),
                                 box_sample(5, 0, 15, 1, 2)};
  EXPECT_NEAR(iou_box(s[0].bbox, s[1].bbox), 0.6, 1e-12);
  EXPECT_NEAR(iou_box(s[1].bbox, s[2].bbox), 0.6, 1e-12);
  EXPECT_LT(iou_box(s[0].bbox, s[2].bbox), 0.5);
  const auto c = cluster_greedy_iou(s, {});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].size(), 3u);
}

TEST(GreedyIou, EmptyInput) { EXPECT_TRUE(cluster_greedy_iou({}, {}).empty()); }

TEST(GreedyIou, ClusterIdsAreSequential) {
  std::mt19937_64 rng(2);
  const auto s = separated_groups(rng, 4, 3);
  const auto c = cluster_greedy_iou(s, {});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i].cluster_id, i);
}

TEST(GreedyIou, PartitionsInputAndIsPermutationInvariant) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(0.0, 60.0), size(2.0, 20.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<DetectionSample> s;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      s.push_back(box_sample(x, y, x + size(rng), y + size(rng), i));
    }
    const auto c = cluster_greedy_iou(s, {});
    std::size_t total = 0;
    for (const auto& cl : c) total += cl.size();
    EXPECT_EQ(total, n);
    const auto p = partition_of(c);
    std::size_t distinct = 0;
    for (const auto& ids : p) distinct += ids.size();
    EXPECT_EQ(distinct, n);

    auto shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(partition_of(cluster_greedy_iou(shuffled, {})), p);
  }
}

TEST(Gmm, SingleSample) {
  std::vector<DetectionSample> s{box_sample(0, 0, 5, 5, 0)};
  const auto c = cluster_gmm(s, {});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].size(), 1u);
}

TEST(Gmm, TwoSeparatedGroups) {
  std::vector<DetectionSample> s;
  for (std::size_t i = 0; i < 5; ++i) s.push_back(box_sample(0, 0, 10, 10, i));
  for (std::size_t i = 5; i < 10; ++i) s.push_back(box_sample(50, 50, 60, 60, i));
  GmmDiagnostics diag;
  const auto c = cluster_gmm(s, {}, &diag);
  EXPECT_EQ(diag.chosen_components, 2u);
  EXPECT_EQ(partition_of(c), (Partition{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}}));
  EXPECT_EQ(partition_of(c), partition_of(cluster_greedy_iou(s, {})));
}

TEST(Gmm, IdenticalBoxesPickOneComponent) {
  std::vector<DetectionSample> s;
  for (std::size_t i = 0; i < 8; ++i) s.push_back(box_sample(3, 4, 13, 14, i));
  GmmDiagnostics diag;
  const auto c = cluster_gmm(s, {}, &diag);
  EXPECT_EQ(diag.chosen_components, 1u);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].size(), 8u);
}

TEST(Gmm, ReproducibleAndLikelihoodMonotone) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> pos(0.0, 80.0), size(5.0, 30.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<DetectionSample> s;
    const std::size_t n = 5 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      s.push_back(box_sample(x, y, x + size(rng), y + size(rng), i));
    }
    ClusteringConfig cfg;
    cfg.gmm_seed = 100 + t;
    GmmDiagnostics d1, d2;
    const auto a = cluster_gmm(s, cfg, &d1);
    const auto b = cluster_gmm(s, cfg, &d2);
    EXPECT_EQ(partition_of(a), partition_of(b));
    EXPECT_EQ(d1.bic, d2.bic);
    EXPECT_EQ(d1.log_likelihood_trace, d2.log_likelihood_trace);
    for (std::size_t i = 1; i < d1.log_likelihood_trace.size(); ++i) {
      const double prev = d1.log_likelihood_trace[i - 1];
      EXPECT_GE(d1.log_likelihood_trace[i], prev - 1e-9 * std::max(1.0, std::abs(prev)));
    }
  }
}

TEST(BothMethods, AgreeOnSeparatedData) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto s = separated_groups(rng, 1 + rng() % 4, 3 + rng() % 5);
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double v = iou_box(s[i].bbox, s[j].bbox);
        EXPECT_TRUE(v == 0.0 || v >= 0.9);
      }
    EXPECT_EQ(partition_of(cluster_gmm(s, {})), partition_of(cluster_greedy_iou(s, {})));
  }
}

TEST(Filter, MinimumSizes) {
  auto make = [](std::initializer_list<std::size_t> sizes) {
    std::vector<Cluster> cs;
    for (std::size_t n : sizes) {
      Cluster c;
      c.cluster_id = cs.size();
      c.members.resize(n);
      cs.push_back(c);
    }
    return cs;
  };
  EXPECT_EQ(filter_clusters(make({5, 2, 1}), 1).kept.size(), 3u);
  const auto two = filter_clusters(make({5, 2, 1}), 2);
  EXPECT_EQ(two.kept.size(), 2u);
  EXPECT_EQ(two.dropped.size(), 1u);
  const auto three = filter_clusters(make({5, 2, 1}), 3);
  ASSERT_EQ(three.kept.size(), 1u);
  EXPECT_EQ(three.kept[0].size(), 5u);
  ASSERT_EQ(three.dropped.size(), 2u);
  EXPECT_EQ(three.dropped[0].size(), 2u);
  EXPECT_EQ(three.dropped[1].size(), 1u);
}

TEST(Config, Validation) {
  ClusteringConfig c;
  c.link_iou = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.link_iou = 0.5;
  c.min_cluster_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
