#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "ccdet/analysis.hpp"
#include "ccdet/criteria.hpp"
#include "ccdet/cycle.hpp"
#include "ccdet/decision.hpp"
#include "ccdet/matching.hpp"
#include "ccdet/pipeline.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace ccdet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); }

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

DiscreteDistribution dist(std::vector<double> probs) {
  DiscreteDistribution d;
  const std::size_t g = probs.size();
  for (std::size_t i = 0; i < g; ++i) d.grid.push_back(static_cast<double>(i) / static_cast<double>(g - 1));
  d.probs = std::move(probs);
  return d;
}

DiscreteDistribution random_dist(std::mt19937_64& rng, std::size_t g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(g);
  for (auto& v : p) v = u(rng) < 0.2 ? 0.0 : u(rng);
  p[rng() % g] += 0.1;
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return dist(p);
}

Outcome criteria_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t clusters = 0, mismatches = 0;
  double worst = 0.0;
  while (clusters < 500) {
    const auto sc = synth::random_cluster(rng);
    const auto f = feature_vector(sc.cluster, {});
    if (f.status != FeatureStatus::complete) continue;
    const auto o = oracle::naive_criteria(sc.cluster).as_vector();
    for (std::size_t i = 0; i <= feature::kMaskAreaStd; ++i) {
      const double rel = std::abs(f.values[i] - o[i]) / std::max({1.0, std::abs(f.values[i]), std::abs(o[i])});
      worst = std::max(worst, rel);
      if (!close(f.values[i], o[i], 1e-12)) ++mismatches;
    }
    ++clusters;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 30.0,
          std::to_string(clusters) + " clusters, " + std::to_string(mismatches) + " mismatches, worst rel " +
              fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome emd_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t g = 2 + rng() % 11;
    const auto p = random_dist(rng, g), q = random_dist(rng, g);
    worst = std::max(worst, std::abs(emd(p, q) - oracle::transport_emd(p.grid, p.probs, q.probs)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, "200 pairs, worst abs " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome divergence_properties() {
  std::mt19937_64 rng(12);
  bool props = true;
  for (int t = 0; t < 300; ++t) {
    const std::size_t g = 2 + rng() % 30;
    const auto p = random_dist(rng, g), q = random_dist(rng, g);
    props = props && kl_divergence(p, p) == 0.0 && js_distance(p, p) == 0.0 && emd(p, p) == 0.0;
    props = props && js_distance(p, q) == js_distance(q, p);
    props = props && js_distance(p, q) <= std::sqrt(std::log(2.0)) + 1e-12;
  }
  const auto p = dist({0.5, 0.5});
  const auto q = dist({0.9, 0.1});
  const double kl = kl_divergence(p, q);
  const double js = js_distance(p, q);
  const bool kl_ok = std::abs(kl - 0.510826) <= 1e-6;
  const bool js_ok = std::abs(js - 0.318976) <= 1e-6;
  return {props && kl_ok && js_ok, std::string("properties ") + (props ? "hold" : "violated") + ", KL=" +
                                       fmt(kl, 10) + (kl_ok ? " ok" : " off") + ", JS=" + fmt(js, 10) +
                                       " vs 0.318976" + (js_ok ? " ok" : " off by " + fmt(std::abs(js - 0.318976), 3))};
}

Outcome hungarian_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t wrong = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
    CostMatrix m(r, c);
    for (auto& v : m.values) v = rng() % 5 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
    if (std::abs(hungarian(m).total_cost - oracle::brute_force_assignment(m)) > 1e-12) ++wrong;
  }
  const double secs = seconds_since(t0);
  return {wrong == 0 && secs < 10.0, "1000 matrices, " + std::to_string(wrong) + " wrong, " + fmt(secs, 3) + " s"};
}

Outcome categorization_fixture() {
  const auto f = synth::categorization_fixture();
  auto all = match_image(f.clusters_a, f.gt_a, IouSource::box, {});
  const auto none = match_image(f.clusters_b, {}, IouSource::box, {});
  all.insert(all.end(), none.begin(), none.end());
  const auto s = summarize(all, f.gt_total);
  std::string got;
  for (Category c : kAllCategories) got += std::string(to_string(c)) + "=" + std::to_string(s.counts[index_of(c)]) + " ";
  got += "FN=" + std::to_string(s.false_negatives);
  return {all.size() == 12 && s.counts == f.expected_counts && s.false_negatives == f.expected_fn,
          std::to_string(all.size()) + " objects: " + got};
}

Outcome invariance() {
  std::mt19937_64 rng(14);
  synth::RandomClusterOptions opt;
  opt.max_side = 32;
  opt.max_members = 30;
  std::size_t violations = 0, trials = 0;
  double worst = 0.0;
  auto compare = [&](const CriteriaVector& a, const CriteriaVector& b) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({1.0, std::abs(a[i]), std::abs(b[i])}));
      if (!close(a[i], b[i], 1e-9)) ++violations;
    }
  };
  while (trials < 100) {
    const auto sc = synth::random_cluster(rng, opt);
    const auto base = feature_vector(sc.cluster, {});
    if (base.status != FeatureStatus::complete) continue;
    const auto moved = feature_vector(synth::translate(sc, 1 + rng() % 20, rng() % 20).cluster, {});
    const auto big = feature_vector(synth::scale(sc, 2 + rng() % 2).cluster, {});
    if (moved.status != FeatureStatus::complete || big.status != FeatureStatus::complete) {
      ++violations;
    } else {
      compare(base.values, moved.values);
      compare(base.values, big.values);
    }
    ++trials;
  }
  return {violations == 0, std::to_string(trials) + " clusters translated and scaled, worst rel " + fmt(worst, 3)};
}

Outcome decision_sanity() {
  const auto train = random_undersample(synth::separable_dataset(5000, 15), 15);
  TreeConfig cfg;
  cfg.seed = 15;
  const auto model = train_tree(train, cfg);
  const auto rep = evaluate(model, synth::separable_dataset(5000, 16));
  const std::vector<Category> truth{Category::TP, Category::TP, Category::FP};
  const std::vector<Category> pred{Category::TP, Category::FP, Category::FP};
  const double hand = evaluate_predictions(truth, pred).weighted_f1;
  const bool hand_ok = std::abs(hand - 2.0 / 3.0) <= 1e-15;
  return {rep.weighted_f1 >= 0.95 && hand_ok, "held-out weighted F1 " + fmt(rep.weighted_f1, 4) + " on " +
                                                  std::to_string(train.size()) + " balanced rows, hand example " +
                                                  fmt(hand, 17)};
}

Outcome sfs_mechanism() {
  std::size_t hits = 0;
  std::string picks;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto set = synth::three_informative_dataset(400, seed);
    SfsConfig cfg;
    cfg.n_select = 4;
    cfg.seed = seed;
    const auto r = sequential_feature_selection(set, cfg);
    if (std::count_if(r.selected.begin(), r.selected.end(), [](std::size_t f) { return f < 3; }) == 3) ++hits;
    picks += "[";
    for (std::size_t i = 0; i < r.selected.size(); ++i) picks += (i ? "," : "") + std::to_string(r.selected[i]);
    picks += "]";
  }
  return {hits == 10, std::to_string(hits) + "/10 seeds, picks " + picks};
}

Outcome cycle_selection() {
  std::mt19937_64 rng(17);
  CycleState state;
  for (int i = 0; i < 40; ++i) state.training.insert("init" + std::to_string(i));
  const std::size_t initial = state.training.size();
  std::size_t total = initial;
  bool exact = true, monotone = true;
  for (int subset = 0; subset < 4; ++subset) {
    ImageCategories images;
    state.candidates.clear();
    const std::size_t n = 20 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "s" + std::to_string(subset) + "_" + std::to_string(i);
      state.candidates.insert(id);
      auto& cats = images[id];
      const std::size_t dets = rng() % 4;
      for (std::size_t d = 0; d < dets; ++d) cats.push_back(kAllCategories[rng() % kNumCategories]);
    }
    total += n;
    std::set<std::string> brute;
    for (const auto& [id, cats] : images) {
      for (Category c : cats) {
        if (c == Category::L_CC || c == Category::C_CC || c == Category::LC_CC) brute.insert(id);
      }
    }
    const auto chosen = select_corner_case_images(images, 1);
    exact = exact && chosen == brute;
    state.counts = tally(images);
    const std::size_t before = state.training.size();
    state = advance_cycle(state, chosen);
    monotone = monotone && state.training.size() >= before && state.training.size() == before + chosen.size();
  }
  const auto rep = cycle_report(state.history);
  const double expected = 1.0 - static_cast<double>(state.training.size()) / static_cast<double>(total);
  const bool arithmetic = rep.total_images == total && rep.used_images == state.training.size() &&
                          std::abs(rep.reduction - expected) <= 1e-15 && rep.rows.size() == 4;
  return {exact && monotone && arithmetic, std::string("selection ") + (exact ? "exact" : "differs") + ", sizes " +
                                               (monotone ? "monotone" : "not monotone") + ", used " +
                                               std::to_string(rep.used_images) + "/" +
                                               std::to_string(rep.total_images) + ", reduction " +
                                               fmt(100.0 * rep.reduction, 4) + "%"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "ccdet_acceptance_determinism";
  fs::remove_all(dir);
  synth::write_scene_dataset(dir / "data", {});
  PipelineConfig cfg;
  cfg.seed = 5;
  cfg.classifier.tree.n_trees = 10;
  cfg.sfs.n_select = 4;
  const FullRunInputs in{dir / "data" / "manifest.json", dir / "data" / "detections.ndjson",
                         dir / "data" / "gt.ndjson"};
  run_full(in, cfg, dir / "a");
  run_full(in, cfg, dir / "b");
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    const auto other = dir / "b" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  std::size_t in_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "b")) ++in_b;
  fs::remove_all(dir);
  return {files > 0 && differing == 0 && in_b == files,
          std::to_string(files) + " artifacts, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"criteria-math oracle", criteria_oracle},
      {"EMD equivalence", emd_equivalence},
      {"divergence properties", divergence_properties},
      {"Hungarian correctness", hungarian_correctness},
      {"categorization fixture", categorization_fixture},
      {"invariance suite", invariance},
      {"decision-function sanity", decision_sanity},
      {"SFS mechanism", sfs_mechanism},
      {"cycle selection", cycle_selection},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
