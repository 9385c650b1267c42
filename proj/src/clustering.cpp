#include "ccdet/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ccdet {

namespace {

constexpr double kVarianceFloor = 1e-4;
// Component standard deviation never drops below this fraction of the seed box side.
constexpr double kRelativeSpreadFloor = 0.05;
constexpr std::size_t kDims = 4;
using Point = std::array<double, kDims>;

// Groups of sample positions -> sorted, numbered clusters.
std::vector<Cluster> make_clusters(std::span<const DetectionSample> samples,
                                   std::vector<std::vector<std::size_t>> groups) {
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  std::vector<Cluster> out;
  out.reserve(groups.size());
  for (std::size_t id = 0; id < groups.size(); ++id) {
    Cluster c;
    c.cluster_id = id;
    for (std::size_t pos : groups[id]) c.members.push_back(samples[pos]);
    out.push_back(std::move(c));
  }
  return out;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct GmmFit {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::vector<double> trace;
  std::vector<std::size_t> assignment;
};

double log_gaussian_diag(const Point& x, const Point& mean, const Point& var) {
  double s = 0.0;
  for (std::size_t d = 0; d < kDims; ++d) {
    const double diff = x[d] - mean[d];
    s += std::log(2.0 * std::numbers::pi * var[d]) + diff * diff / var[d];
  }
  return -0.5 * s;
}

GmmFit fit_gmm(const std::vector<Point>& xs, std::size_t k, const ClusteringConfig& cfg) {
  const std::size_t n = xs.size();
  std::mt19937_64 rng(cfg.gmm_seed ^ (0x9E3779B97F4A7C15ULL * (k + 1)));

  // k-means++ seeding.
  std::vector<Point> means;
  means.push_back(xs[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n]);
  std::vector<double> d2(n);
  while (means.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point& m : means) {
        double s = 0.0;
        for (std::size_t d = 0; d < kDims; ++d) s += (xs[i][d] - m[d]) * (xs[i][d] - m[d]);
        best = std::min(best, s);
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
    }
    means.push_back(xs[pick]);
  }

  Point global_mean{};
  for (const Point& x : xs)
    for (std::size_t d = 0; d < kDims; ++d) global_mean[d] += x[d] / static_cast<double>(n);
  Point global_var{};
  for (const Point& x : xs)
    for (std::size_t d = 0; d < kDims; ++d)
      global_var[d] += (x[d] - global_mean[d]) * (x[d] - global_mean[d]) / static_cast<double>(n);

  std::vector<Point> floors(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double w = kRelativeSpreadFloor * (means[c][2] - means[c][0]);
    const double h = kRelativeSpreadFloor * (means[c][3] - means[c][1]);
    floors[c] = {std::max(kVarianceFloor, w * w), std::max(kVarianceFloor, h * h),
                 std::max(kVarianceFloor, w * w), std::max(kVarianceFloor, h * h)};
  }
  std::vector<Point> vars(k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < kDims; ++d) vars[c][d] = std::max(global_var[d], floors[c][d]);
  std::vector<double> log_w(k, -std::log(static_cast<double>(k)));
  std::vector<double> resp(n * k);
  std::vector<double> lp(k);

  GmmFit fit;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < cfg.gmm_max_iterations; ++iter) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        lp[c] = std::isfinite(log_w[c]) ? log_w[c] + log_gaussian_diag(xs[i], means[c], vars[c])
                                        : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, lp[c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(lp[c] - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(lp[c] - lse);
    }
    fit.trace.push_back(ll);
    fit.log_likelihood = ll;
    if (std::abs(ll - prev) <= cfg.gmm_tolerance * std::max(1.0, std::abs(ll))) {
      fit.converged = true;
      break;
    }
    prev = ll;

    // M-step
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + c];
      if (nk < 1e-12) {
        log_w[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      log_w[c] = std::log(nk / static_cast<double>(n));
      Point m{};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < kDims; ++d) m[d] += resp[i * k + c] * xs[i][d];
      for (double& v : m) v /= nk;
      Point var{};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < kDims; ++d)
          var[d] += resp[i * k + c] * (xs[i][d] - m[d]) * (xs[i][d] - m[d]);
      for (std::size_t d = 0; d < kDims; ++d) var[d] = std::max(var[d] / nk, floors[c][d]);
      means[c] = m;
      vars[c] = var;
    }
  }

  fit.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (resp[i * k + c] > resp[i * k + best]) best = c;
    }
    fit.assignment[i] = best;
  }
  return fit;
}

}  // namespace

void ClusteringConfig::validate() const {
  if (!(link_iou > 0.0 && link_iou < 1.0)) {
    throw std::invalid_argument("link_iou must be in (0, 1)");
  }
  if (min_cluster_size < 1) {
    throw std::invalid_argument("min_cluster_size must be at least 1");
  }
  if (gmm_max_components < 1) {
    throw std::invalid_argument("gmm_max_components must be at least 1");
  }
  if (gmm_max_iterations < 1) {
    throw std::invalid_argument("gmm_max_iterations must be at least 1");
  }
}

std::vector<Cluster> cluster_greedy_iou(std::span<const DetectionSample> samples,
                                        const ClusteringConfig& config) {
  const std::size_t n = samples.size();
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (iou_box(samples[i].bbox, samples[j].bbox) >= config.link_iou) {
        sets.unite(i, j);
      }
    }
  }
  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);
  return make_clusters(samples, std::move(groups));
}

std::vector<Cluster> cluster_gmm(std::span<const DetectionSample> samples,
                                 const ClusteringConfig& config, GmmDiagnostics* diagnostics) {
  GmmDiagnostics diag;
  const std::size_t n = samples.size();
  if (n == 0) {
    if (diagnostics) *diagnostics = diag;
    return {};
  }
  std::vector<Point> xs;
  xs.reserve(n);
  for (const auto& s : samples) xs.push_back({s.bbox.x1, s.bbox.y1, s.bbox.x2, s.bbox.y2});

  const std::size_t k_max = std::min(config.gmm_max_components, n);
  GmmFit best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= k_max; ++k) {
    GmmFit fit = fit_gmm(xs, k, config);
    const double params = static_cast<double>(k * 2 * kDims + (k - 1));
    const double bic = -2.0 * fit.log_likelihood + params * std::log(static_cast<double>(n));
    diag.bic.push_back(bic);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(fit);
      diag.chosen_components = k;
    }
  }
  diag.converged = best.converged;
  diag.log_likelihood_trace = best.trace;

  std::vector<std::vector<std::size_t>> groups(diag.chosen_components);
  for (std::size_t i = 0; i < n; ++i) groups[best.assignment[i]].push_back(i);
  if (diagnostics) *diagnostics = std::move(diag);
  return make_clusters(samples, std::move(groups));
}

std::vector<Cluster> cluster_samples(std::span<const DetectionSample> samples,
                                     const ClusteringConfig& config) {
  switch (config.method) {
    case ClusterMethod::greedy_iou: return cluster_greedy_iou(samples, config);
    case ClusterMethod::gmm: return cluster_gmm(samples, config);
  }
  return {};
}

ClusterPartition filter_clusters(std::vector<Cluster> clusters, std::size_t min_cluster_size) {
  ClusterPartition out;
  for (Cluster& c : clusters) {
    (c.size() >= min_cluster_size ? out.kept : out.dropped).push_back(std::move(c));
  }
  return out;
}

}  // namespace ccdet
