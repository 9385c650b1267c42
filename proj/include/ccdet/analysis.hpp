#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccdet/decision.hpp"
#include "ccdet/features.hpp"

namespace ccdet {

// `defined` is false when either input has zero variance.
struct Correlation {
  double value = 0.0;
  bool defined = false;
};

// Both require |x| = |y| >= 2; std::invalid_argument otherwise.
Correlation pearson(std::span<const double> x, std::span<const double> y);
Correlation spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks, ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> v);

enum class CriteriaGroup { class_score, box, mask, combined };
std::string_view to_string(CriteriaGroup g);
CriteriaGroup group_of(std::size_t feature);

enum class IouTarget { box, mask };

struct CorrelationEntry {
  std::size_t feature = 0;
  CriteriaGroup group = CriteriaGroup::box;
  IouTarget target = IouTarget::box;
  std::size_t n = 0;
  Correlation pearson;
  Correlation spearman;
};

// Entries ordered box group vs box IoU, mask group vs mask IoU, combined vs
// both, class-score group vs both, then the box/mask cross pairs.
struct CorrelationTable {
  std::vector<CorrelationEntry> entries;

  const CorrelationEntry* find(std::size_t feature, IouTarget target) const;
};

// Rows without a mask IoU are skipped for the mask target. A target with
// fewer than two usable rows yields undefined entries.
CorrelationTable correlation_report(std::span<const CriteriaVector> features,
                                    std::span<const double> box_iou,
                                    std::span<const std::optional<double>> mask_iou);

void write_correlation_csv(const CorrelationTable& table, std::ostream& out);
nlohmann::json to_json(const CorrelationTable& table);

enum class SelectionDirection { forward, backward };
std::string_view to_string(SelectionDirection d);

struct SfsConfig {
  SelectionDirection direction = SelectionDirection::forward;
  std::size_t n_select = 10;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  TreeConfig tree;
  std::size_t jobs = 1;

  void validate(std::size_t n_features) const;
};

struct SelectionStep {
  std::size_t feature = 0;  // added (forward) or removed (backward)
  double score = 0.0;       // mean cross-validated weighted F1 after the step
};

struct SelectionResult {
  SelectionDirection direction = SelectionDirection::forward;
  // Forward: in pick order. Backward: surviving features in index order.
  std::vector<std::size_t> selected;
  std::vector<SelectionStep> steps;
  double final_score = 0.0;
};

// Mean weighted F1 of a decision tree over seeded folds, on the given columns.
double cross_validated_f1(const LabeledSet& set, std::span<const std::size_t> columns,
                          std::size_t folds, std::uint64_t seed, const TreeConfig& tree);

SelectionResult sequential_feature_selection(const LabeledSet& set, const SfsConfig& config);

// `names` maps feature indices to labels; defaults to the criteria names.
nlohmann::json to_json(const SelectionResult& result,
                       std::span<const std::string_view> names = kFeatureNames);

}  // namespace ccdet
