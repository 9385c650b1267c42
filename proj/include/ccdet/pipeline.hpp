#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccdet/analysis.hpp"
#include "ccdet/clustering.hpp"
#include "ccdet/criteria.hpp"
#include "ccdet/cycle.hpp"
#include "ccdet/decision.hpp"
#include "ccdet/ingest.hpp"
#include "ccdet/matching.hpp"

namespace ccdet {

enum class SfsMode { forward, backward, both };

struct ClassifierConfig {
  ModelKind kind = ModelKind::tree;
  TreeConfig tree;
  bool undersample = true;
};

struct SfsSettings {
  SfsMode mode = SfsMode::both;
  std::size_t n_select = 10;
  std::size_t folds = 5;
};

// Every tunable of the tool in one document. `seed` feeds every seeded
// stage; `jobs` bounds every worker pool.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ClusteringConfig clustering;
  FeatureConfig features;
  IouSource iou_source = IouSource::box;
  CategoryThresholds thresholds;
  ClassifierConfig classifier;
  SfsSettings sfs;
  std::size_t min_cc = 1;

  // Throws InputError on an out-of-range value.
  void validate() const;
};

// Unknown keys at any level are an InputError.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

// Per-cluster record shared by the criteria and categorize stages.
struct ClusterRecord {
  std::string image_id;
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  FeatureStatus status = FeatureStatus::complete;
  BBox mean_box;
  std::optional<RleMask> mean_mask;
  std::size_t k_max = 0;
  double score = 0.0;
};

struct CriteriaOutput {
  std::vector<FeatureRow> features;
  std::vector<ClusterRecord> clusters;
  std::vector<std::string> warnings;
};

// Cluster + criteria for every image, merged in image_id order.
CriteriaOutput run_criteria(const RunData& run, const PipelineConfig& config);

void write_clusters(const std::vector<ClusterRecord>& clusters, std::ostream& out);
std::vector<ClusterRecord> read_clusters(std::istream& in);

struct CategorizeOutput {
  std::vector<MatchResult> matches;
  DatasetSummary summary;
};

// `gt` may be null: every cluster is then FP.
CategorizeOutput run_categorize(const RunManifest& manifest, const std::vector<ClusterRecord>& clusters,
                                const GroundTruthSet* gt, const PipelineConfig& config);

void write_categorized(const std::vector<MatchResult>& matches, std::ostream& out);
std::vector<MatchResult> read_categorized(std::istream& in);

nlohmann::json summary_json(const DatasetSummary& summary);
std::string format_summary(const DatasetSummary& summary, const std::string& dataset);

// Copies each match's category onto the feature row with the same
// (image_id, cluster_id). Rows without a match keep an empty label.
std::vector<FeatureRow> attach_labels(std::vector<FeatureRow> rows,
                                      const std::vector<MatchResult>& matches);

DecisionModel run_train(const std::vector<FeatureRow>& labeled, const PipelineConfig& config);
EvalReport run_eval(const DecisionModel& model, const std::vector<FeatureRow>& labeled);

struct AnalysisOutput {
  CorrelationTable correlations;
  std::vector<SelectionResult> selections;
};

// Correlations use complete rows with a GT match; selection uses complete labeled rows.
AnalysisOutput run_analyze(const std::vector<FeatureRow>& rows, const std::vector<MatchResult>& matches,
                           const PipelineConfig& config);
nlohmann::json selections_json(const std::vector<SelectionResult>& selections);

ImageCategories group_by_image(const std::vector<MatchResult>& matches);

// selection.json: {"cycle":n,"selected":[ids],"counts":{...}}
nlohmann::json selection_json(std::size_t cycle, const std::set<std::string>& selected,
                              const std::array<std::size_t, kNumCategories>& counts,
                              std::size_t false_negatives);

struct FullRunInputs {
  std::filesystem::path manifest;
  std::filesystem::path detections;
  std::optional<std::filesystem::path> gt;
};

// criteria + categorize + analyze, plus train/eval when the labeled rows
// allow it. Writes every artifact into `out_dir`; returns warnings.
std::vector<std::string> run_full(const FullRunInputs& inputs, const PipelineConfig& config,
                                  const std::filesystem::path& out_dir);

// Writes JSON with two-space indentation and a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ccdet
