#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccdet/category.hpp"
#include "ccdet/ingest.hpp"

namespace ccdet {

using ClassDistribution = std::array<double, kNumCategories>;

// Row-major feature matrix with one category label per row.
class LabeledSet {
 public:
  LabeledSet() = default;
  explicit LabeledSet(std::size_t n_features) : n_features_(n_features) {}

  // Keeps complete, labeled rows only.
  static LabeledSet from_feature_rows(std::span<const FeatureRow> rows);

  void add(std::span<const double> features, Category label, std::size_t row_id);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t n_features() const { return n_features_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_features_, n_features_};
  }
  Category label(std::size_t i) const { return labels_[i]; }
  std::size_t row_id(std::size_t i) const { return row_ids_[i]; }
  std::span<const Category> labels() const { return labels_; }

  std::array<std::size_t, kNumCategories> class_counts() const;
  std::size_t distinct_classes() const;

  LabeledSet subset(std::span<const std::size_t> indices) const;
  LabeledSet select_features(std::span<const std::size_t> columns) const;

 private:
  std::size_t n_features_ = 0;
  std::vector<double> values_;
  std::vector<Category> labels_;
  std::vector<std::size_t> row_ids_;
};

// Every class downsampled without replacement to the minority count.
// Throws InputError naming any class with no rows.
LabeledSet random_undersample(const LabeledSet& set, std::uint64_t seed);

struct TreeConfig {
  std::size_t max_depth = 12;
  std::size_t min_leaf = 5;
  std::size_t n_trees = 100;
  // Features tried per split; 0 = all for a tree, round(sqrt(d)) for a forest.
  std::size_t max_features = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  ClassDistribution distribution{};
};

struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const;
  std::size_t depth() const;
};

enum class ModelKind { tree, forest };

struct Prediction {
  Category label = Category::TP;
  ClassDistribution distribution{};
};

struct DecisionModel {
  ModelKind kind = ModelKind::tree;
  TreeConfig config;
  std::size_t n_features = 0;
  std::vector<Tree> trees;

  Prediction predict(std::span<const double> x) const;
};

// CART with Gini impurity. Throws InputError for fewer than two classes.
DecisionModel train_tree(const LabeledSet& set, const TreeConfig& config);
DecisionModel train_forest(const LabeledSet& set, const TreeConfig& config);

struct EvalReport {
  std::array<std::array<std::size_t, kNumCategories>, kNumCategories> confusion{};  // [true][pred]
  ClassDistribution precision{};
  ClassDistribution recall{};
  ClassDistribution f1{};
  std::array<std::size_t, kNumCategories> support{};
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
};

EvalReport evaluate_predictions(std::span<const Category> truth, std::span<const Category> predicted);
EvalReport evaluate(const DecisionModel& model, const LabeledSet& test);

nlohmann::json to_json(const DecisionModel& model);
DecisionModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& report);
std::string format_report(const EvalReport& report);

}  // namespace ccdet
