#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ccdet/ingest.hpp"

namespace ccdet {

// Samples attributed to one physical object.
struct Cluster {
  std::size_t cluster_id = 0;
  std::vector<DetectionSample> members;

  std::size_t size() const { return members.size(); }
};

enum class ClusterMethod { greedy_iou, gmm };

struct ClusteringConfig {
  ClusterMethod method = ClusterMethod::greedy_iou;
  double link_iou = 0.5;
  std::size_t min_cluster_size = 2;
  std::size_t gmm_max_components = 10;
  std::uint64_t gmm_seed = 0;
  std::size_t gmm_max_iterations = 200;
  double gmm_tolerance = 1e-6;

  // Throws std::invalid_argument when out of range.
  void validate() const;
};

// Single-linkage components of the graph "iou_box >= link_iou". Sorted by
// descending size, then by smallest member position in `samples`.
std::vector<Cluster> cluster_greedy_iou(std::span<const DetectionSample> samples,
                                        const ClusteringConfig& config);

struct GmmDiagnostics {
  std::size_t chosen_components = 0;
  bool converged = true;
  std::vector<double> bic;  // one entry per K tried, K = 1..
  // EM log-likelihood per iteration for the selected K.
  std::vector<double> log_likelihood_trace;
};

// EM over (x1, y1, x2, y2) with diagonal covariances; K picked by minimum BIC.
// Component variances are floored at max(1e-4, (0.05 * seed box side)^2).
std::vector<Cluster> cluster_gmm(std::span<const DetectionSample> samples,
                                 const ClusteringConfig& config,
                                 GmmDiagnostics* diagnostics = nullptr);

std::vector<Cluster> cluster_samples(std::span<const DetectionSample> samples,
                                     const ClusteringConfig& config);

struct ClusterPartition {
  std::vector<Cluster> kept;
  std::vector<Cluster> dropped;
};

ClusterPartition filter_clusters(std::vector<Cluster> clusters, std::size_t min_cluster_size);

}  // namespace ccdet
