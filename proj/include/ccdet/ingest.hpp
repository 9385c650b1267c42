#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccdet/category.hpp"
#include "ccdet/features.hpp"
#include "ccdet/geometry.hpp"

namespace ccdet {

// One stochastic forward-pass prediction.
struct DetectionSample {
  std::string image_id;
  int repetition = 0;
  std::vector<double> class_scores;
  BBox bbox;
  std::optional<RleMask> mask;
  // 0-based line number in the source file; stable identity of the sample.
  std::size_t source_index = 0;
};

struct GroundTruthObject {
  std::string image_id;
  int class_id = 0;
  BBox bbox;
  std::optional<RleMask> mask;
  std::size_t source_index = 0;
};

struct ImageInfo {
  std::string image_id;
  std::size_t width = 0;
  std::size_t height = 0;
};

struct RunManifest {
  std::string dataset;
  std::size_t k = 0;
  std::vector<std::string> class_names;
  int repetitions = 1;
  std::vector<ImageInfo> images;

  const ImageInfo* find_image(const std::string& image_id) const;
};

// Samples grouped by image_id (lexicographic), each group ordered by
// repetition and then input order.
struct RunData {
  RunManifest manifest;
  std::map<std::string, std::vector<DetectionSample>> by_image;
  std::size_t total = 0;
  std::vector<std::string> warnings;
};

struct GroundTruthSet {
  std::map<std::string, std::vector<GroundTruthObject>> by_image;
  std::size_t total = 0;
  std::vector<std::string> warnings;
};

enum class FeatureStatus { complete, box_only, undefined };

std::string_view to_string(FeatureStatus s);
std::optional<FeatureStatus> parse_feature_status(std::string_view s);

struct FeatureRow {
  std::string image_id;
  std::size_t cluster_id = 0;
  FeatureStatus status = FeatureStatus::complete;
  CriteriaVector values{};
  std::optional<Category> label;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

RunManifest parse_manifest(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& path);

// NDJSON readers. Errors are InputError with a 1-based line number.
RunData parse_run(const RunManifest& manifest, std::istream& detections);
RunData load_run(const std::filesystem::path& manifest_path,
                 const std::filesystem::path& detections_path);

GroundTruthSet parse_ground_truth(const RunManifest& manifest, std::istream& in);
GroundTruthSet load_ground_truth(const RunManifest& manifest,
                                 const std::filesystem::path& path);

// {"size":[H,W],"counts":[...]}
nlohmann::json rle_to_json(const RleMask& r);
RleMask rle_from_json(const nlohmann::json& j);

// CSV: image_id,cluster_id,status,<26 criteria>,label
void write_feature_table(const std::vector<FeatureRow>& rows, std::ostream& out);
void write_feature_table(const std::vector<FeatureRow>& rows,
                         const std::filesystem::path& path);
std::vector<FeatureRow> read_feature_table(std::istream& in);
std::vector<FeatureRow> read_feature_table(const std::filesystem::path& path);

}  // namespace ccdet
