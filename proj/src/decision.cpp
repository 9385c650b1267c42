#include "ccdet/decision.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ccdet/errors.hpp"
#include "ccdet/parallel.hpp"

namespace ccdet {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  // n is small; modulo bias is negligible and the result is platform-stable.
  return static_cast<std::size_t>(rng() % n);
}

std::size_t argmax_lowest(const ClassDistribution& d) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < d.size(); ++c) {
    if (d[c] > d[best]) best = c;
  }
  return best;
}

using Counts = std::array<std::size_t, kNumCategories>;

double gini(const Counts& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s -= p * p;
  }
  return s;
}

class TreeBuilder {
 public:
  TreeBuilder(const LabeledSet& set, const TreeConfig& cfg, std::size_t max_features,
              std::uint64_t seed)
      : set_(set), cfg_(cfg), max_features_(max_features), rng_(seed) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  int grow(Tree& tree, std::vector<std::size_t>& rows, std::size_t depth) {
    Counts counts{};
    for (std::size_t r : rows) ++counts[index_of(set_.label(r))];
    const std::size_t n = rows.size();

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      tree.nodes[id].distribution[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || depth >= cfg_.max_depth || n < 2 * cfg_.min_leaf) {
      return id;
    }
    const Split split = best_split(rows, counts);
    if (!std::isfinite(split.impurity)) {
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      (set_.row(r)[split.feature] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    TreeNode& node = tree.nodes[id];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = set_.n_features();
    std::vector<std::size_t> f(d);
    std::iota(f.begin(), f.end(), std::size_t{0});
    if (max_features_ >= d) return f;
    for (std::size_t i = 0; i < max_features_; ++i) {
      std::swap(f[i], f[i + uniform_index(rng_, d - i)]);
    }
    f.resize(max_features_);
    std::sort(f.begin(), f.end());
    return f;
  }

  Split best_split(const std::vector<std::size_t>& rows, const Counts& total) {
    const std::size_t n = rows.size();
    Split best;
    std::vector<std::pair<double, Category>> col(n);
    for (std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) col[i] = {set_.row(rows[i])[f], set_.label(rows[i])};
      std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      Counts left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[index_of(col[i].second)];
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (col[i].first == col[i + 1].first) continue;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        Counts right{};
        for (std::size_t c = 0; c < kNumCategories; ++c) right[c] = total[c] - left[c];
        const double imp = (static_cast<double>(nl) * gini(left, nl) +
                            static_cast<double>(nr) * gini(right, nr)) /
                           static_cast<double>(n);
        if (imp < best.impurity - 1e-12) {
          double thr = 0.5 * (col[i].first + col[i + 1].first);
          if (!(thr < col[i + 1].first)) thr = col[i].first;
          best = {f, thr, imp};
        }
      }
    }
    return best;
  }

  const LabeledSet& set_;
  const TreeConfig& cfg_;
  std::size_t max_features_;
  std::mt19937_64 rng_;
};

void require_trainable(const LabeledSet& set) {
  if (set.distinct_classes() < 2) {
    throw InputError("training needs at least two distinct classes");
  }
  if (set.n_features() == 0) {
    throw InputError("training needs at least one feature");
  }
}

json distribution_json(const ClassDistribution& d) { return json(std::vector<double>(d.begin(), d.end())); }

}  // namespace

LabeledSet LabeledSet::from_feature_rows(std::span<const FeatureRow> rows) {
  LabeledSet set(kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status == FeatureStatus::complete && rows[i].label) {
      set.add(rows[i].values, *rows[i].label, i);
    }
  }
  return set;
}

void LabeledSet::add(std::span<const double> features, Category label, std::size_t row_id) {
  if (features.size() != n_features_) {
    throw std::invalid_argument("feature row has the wrong width");
  }
  values_.insert(values_.end(), features.begin(), features.end());
  labels_.push_back(label);
  row_ids_.push_back(row_id);
}

std::array<std::size_t, kNumCategories> LabeledSet::class_counts() const {
  std::array<std::size_t, kNumCategories> c{};
  for (Category l : labels_) ++c[index_of(l)];
  return c;
}

std::size_t LabeledSet::distinct_classes() const {
  const auto c = class_counts();
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](std::size_t v) { return v > 0; }));
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out(n_features_);
  for (std::size_t i : indices) out.add(row(i), labels_[i], row_ids_[i]);
  return out;
}

LabeledSet LabeledSet::select_features(std::span<const std::size_t> columns) const {
  LabeledSet out(columns.size());
  std::vector<double> buf(columns.size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    for (std::size_t c = 0; c < columns.size(); ++c) buf[c] = r[columns[c]];
    out.add(buf, labels_[i], row_ids_[i]);
  }
  return out;
}

LabeledSet random_undersample(const LabeledSet& set, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumCategories> by_class;
  for (std::size_t i = 0; i < set.size(); ++i) by_class[index_of(set.label(i))].push_back(i);
  std::string missing;
  for (Category c : kAllCategories) {
    if (by_class[index_of(c)].empty()) {
      missing += (missing.empty() ? "" : ", ") + std::string(to_string(c));
    }
  }
  if (!missing.empty()) {
    throw InputError("cannot undersample, classes without rows: " + missing);
  }
  std::size_t minority = set.size();
  for (const auto& v : by_class) minority = std::min(minority, v.size());

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& v : by_class) {
    for (std::size_t i = 0; i < minority; ++i) {
      std::swap(v[i], v[i + uniform_index(rng, v.size() - i)]);
    }
    keep.insert(keep.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(keep.begin(), keep.end());
  return set.subset(keep);
}

void TreeConfig::validate() const {
  if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be at least 1");
  if (n_trees < 1) throw std::invalid_argument("n_trees must be at least 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes.front();
  while (node->feature >= 0) {
    node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                               ? node->left
                                               : node->right)];
  }
  return *node;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

Prediction DecisionModel::predict(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw std::invalid_argument("predict: expected " + std::to_string(n_features) + " features");
  }
  Prediction p;
  if (kind == ModelKind::tree) {
    p.distribution = trees.front().leaf_for(x).distribution;
  } else {
    for (const Tree& t : trees) p.distribution[argmax_lowest(t.leaf_for(x).distribution)] += 1.0;
    for (double& v : p.distribution) v /= static_cast<double>(trees.size());
  }
  p.label = kAllCategories[argmax_lowest(p.distribution)];
  return p;
}

DecisionModel train_tree(const LabeledSet& set, const TreeConfig& config) {
  config.validate();
  require_trainable(set);
  DecisionModel model;
  model.kind = ModelKind::tree;
  model.config = config;
  model.n_features = set.n_features();
  const std::size_t mf = config.max_features == 0 ? set.n_features() : config.max_features;
  std::vector<std::size_t> rows(set.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  model.trees.push_back(TreeBuilder(set, config, mf, config.seed).build(std::move(rows)));
  return model;
}

DecisionModel train_forest(const LabeledSet& set, const TreeConfig& config) {
  config.validate();
  require_trainable(set);
  DecisionModel model;
  model.kind = ModelKind::forest;
  model.config = config;
  model.n_features = set.n_features();
  const std::size_t mf =
      config.max_features == 0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(set.n_features())))))
          : config.max_features;
  model.trees.resize(config.n_trees);

  auto train_one = [&](std::size_t t) {
    const std::uint64_t seed = splitmix64(config.seed + t);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> rows(set.size());
    if (config.bootstrap) {
      for (auto& r : rows) r = uniform_index(rng, set.size());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    model.trees[t] = TreeBuilder(set, config, mf, rng()).build(std::move(rows));
  };

  parallel_for(config.n_trees, config.jobs, train_one);
  return model;
}

EvalReport evaluate_predictions(std::span<const Category> truth, std::span<const Category> predicted) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("truth and prediction lengths differ");
  }
  EvalReport r;
  r.total = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[index_of(truth[i])][index_of(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    std::size_t predicted_c = 0;
    for (std::size_t t = 0; t < kNumCategories; ++t) {
      r.support[c] += r.confusion[c][t];
      predicted_c += r.confusion[t][c];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = predicted_c == 0 ? 0.0 : tp / static_cast<double>(predicted_c);
    r.recall[c] = r.support[c] == 0 ? 0.0 : tp / static_cast<double>(r.support[c]);
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / denom;
  }
  if (r.total > 0) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      r.weighted_f1 += static_cast<double>(r.support[c]) * r.f1[c];
    }
    r.weighted_f1 /= static_cast<double>(r.total);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  }
  return r;
}

EvalReport evaluate(const DecisionModel& model, const LabeledSet& test) {
  std::vector<Category> predicted;
  predicted.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) predicted.push_back(model.predict(test.row(i)).label);
  return evaluate_predictions(test.labels(), predicted);
}

json to_json(const DecisionModel& model) {
  json trees = json::array();
  for (const Tree& t : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.feature < 0) {
        nodes.push_back({{"leaf", distribution_json(n.distribution)}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"distribution", distribution_json(n.distribution)}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  const TreeConfig& c = model.config;
  return json{{"kind", model.kind == ModelKind::tree ? "tree" : "forest"},
              {"n_features", model.n_features},
              {"classes", {"TP", "L_CC", "C_CC", "LC_CC", "FP"}},
              {"config",
               {{"max_depth", c.max_depth},
                {"min_leaf", c.min_leaf},
                {"n_trees", c.n_trees},
                {"max_features", c.max_features},
                {"bootstrap", c.bootstrap},
                {"seed", c.seed}}},
              {"trees", std::move(trees)}};
}

DecisionModel model_from_json(const json& j) {
  DecisionModel m;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "tree" && kind != "forest") throw InputError("model: unknown kind '" + kind + "'");
    m.kind = kind == "tree" ? ModelKind::tree : ModelKind::forest;
    m.n_features = j.at("n_features").get<std::size_t>();
    const json& c = j.at("config");
    m.config.max_depth = c.at("max_depth").get<std::size_t>();
    m.config.min_leaf = c.at("min_leaf").get<std::size_t>();
    m.config.n_trees = c.at("n_trees").get<std::size_t>();
    m.config.max_features = c.at("max_features").get<std::size_t>();
    m.config.bootstrap = c.at("bootstrap").get<bool>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const json& jt : j.at("trees")) {
      Tree t;
      for (const json& jn : jt) {
        TreeNode n;
        const json& dist = jn.contains("leaf") ? jn.at("leaf") : jn.at("distribution");
        const auto d = dist.get<std::vector<double>>();
        if (d.size() != kNumCategories) throw InputError("model: bad distribution width");
        std::copy(d.begin(), d.end(), n.distribution.begin());
        if (!jn.contains("leaf")) {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        t.nodes.push_back(n);
      }
      // structural checks: children in range, features in range
      for (const TreeNode& n : t.nodes) {
        if (n.feature < 0) continue;
        const auto sz = static_cast<int>(t.nodes.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= sz || n.right >= sz ||
            static_cast<std::size_t>(n.feature) >= m.n_features) {
          throw InputError("model: malformed tree node");
        }
      }
      if (t.nodes.empty()) throw InputError("model: empty tree");
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
  if (m.trees.empty()) throw InputError("model: no trees");
  return m;
}

json to_json(const EvalReport& r) {
  json per_class = json::object();
  for (Category c : kAllCategories) {
    const std::size_t i = index_of(c);
    per_class[std::string(to_string(c))] = {{"precision", r.precision[i]},
                                            {"recall", r.recall[i]},
                                            {"f1", r.f1[i]},
                                            {"support", r.support[i]}};
  }
  json confusion = json::array();
  for (const auto& row : r.confusion) confusion.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  return json{{"classes", {"TP", "L_CC", "C_CC", "LC_CC", "FP"}},
              {"confusion", std::move(confusion)},
              {"per_class", std::move(per_class)},
              {"weighted_f1", r.weighted_f1},
              {"accuracy", r.accuracy},
              {"total", r.total}};
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "confusion matrix (rows: true, columns: predicted)\n";
  out << std::setw(8) << "";
  for (Category c : kAllCategories) out << std::setw(8) << to_string(c);
  out << '\n';
  for (Category t : kAllCategories) {
    out << std::setw(8) << to_string(t);
    for (Category p : kAllCategories) out << std::setw(8) << r.confusion[index_of(t)][index_of(p)];
    out << '\n';
  }
  out << '\n' << std::setw(8) << "" << std::setw(11) << "precision" << std::setw(8) << "recall"
      << std::setw(8) << "f1" << std::setw(9) << "support" << '\n';
  out << std::fixed << std::setprecision(3);
  for (Category c : kAllCategories) {
    const std::size_t i = index_of(c);
    out << std::setw(8) << to_string(c) << std::setw(11) << r.precision[i] << std::setw(8) << r.recall[i]
        << std::setw(8) << r.f1[i] << std::setw(9) << r.support[i] << '\n';
  }
  out << "\nweighted F1 " << r.weighted_f1 << "  accuracy " << r.accuracy << "  n=" << r.total << '\n';
  return out.str();
}

}  // namespace ccdet
